"""Lyapunov metrics along an orbit and Pesin-set certificates.

The orbit-dependent inner product weighs the forward cocycle on the
stable block and the inverse cocycle on the unstable block:

    stable:   sum_{l>=0} e^{-2(a+2e)l} <S^l_n xi,  S^l_n xi'>
    unstable: sum_{l=0..n} e^{2(b-2e)l} <(U^l_{n-l})^-1 eta, (U^l_{n-l})^-1 eta'>

with the two blocks declared orthogonal.  The full norm is the max of
the block norms.  Certificates bound the uniformity functions l, r and
C_delta over a finite horizon and never claim anything beyond it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, GapViolationError, SingularCocycleError
from .oseledets import (OseledetsSplit, PesinParams, SplitFrames,
                        propagate_frames, propagated_angles, stable_splitting,
                        subspace_angle)
from .rds import CenteredFrame, OmegaWord, as_orbit_source

TERM_TOL = 1e-12
DIVERGENCE_RUN = 10


def lemma_A(l_cap: float, eps: float) -> float:
    """Norm-equivalence constant A = 4 l'^2 (1 - e^{-2 eps})^{-1/2}."""
    return 4.0 * l_cap ** 2 / np.sqrt(1.0 - np.exp(-2.0 * eps))


def _step_matrices(frames: SplitFrames):
    """Per-step matrices of the restricted cocycles in the propagated
    orthonormal frames: SA_m for E_m -> E_{m+1}, BU_m for H_m -> H_{m+1}."""
    n = frames.jacs.shape[0]
    SA = np.empty((n, frames.QE.shape[2], frames.QE.shape[2]))
    BU = np.empty((n, frames.QH.shape[2], frames.QH.shape[2]))
    for m in range(n):
        SA[m] = frames.QE[m + 1].T @ (frames.jacs[m] @ frames.QE[m])
        BU[m] = frames.QH[m + 1].T @ (frames.jacs[m] @ frames.QH[m])
    return SA, BU


class LyapunovMetric:
    """Gram data realizing the Lyapunov inner products at n = 0..horizon."""

    def __init__(self, word: OmegaWord, x, split: OseledetsSplit,
                 params: PesinParams, horizon: int,
                 term_tol: float = TERM_TOL, series_cap: int | None = None):
        self.word = word
        self.source = as_orbit_source(word, x)
        self.x = self.source.base()
        self.split = split
        self.params = params
        self.horizon = int(horizon)
        if series_cap is None:
            series_cap = min(max(64, 10 * self.horizon), 4000)
        self.series_cap = series_cap
        self.frames = propagate_frames(word, self.source, split, self.horizon + series_cap)
        self._SA, self._BU = _step_matrices(self.frames)
        self.diverged = False
        self._build(term_tol)

    # -- construction ---------------------------------------------------

    def _build(self, term_tol: float) -> None:
        k = self.split.k
        dk = self.split.dim - k
        N = self.horizon
        a, b, eps = self.params.a, self.params.b, self.params.eps
        ws = np.exp(-2.0 * (a + 2.0 * eps))
        wu = np.exp(2.0 * (b - 2.0 * eps))

        self.Gs = np.empty((N + 1, k, k))
        self.Gu = np.empty((N + 1, dk, dk))
        self.trunc_K = np.zeros(N + 1, dtype=int)
        self.trunc_residual = np.zeros(N + 1)

        for n in range(N + 1):
            g = np.eye(k)
            m = np.eye(k)
            total = float(k)
            growth_run = 0
            prev = np.inf
            tnorm = 0.0
            decay = 0.0
            l = 0
            while l < self.series_cap:
                m = self._SA[n + l] @ m
                l += 1
                term = (ws ** l) * (m.T @ m)
                tnorm = np.linalg.norm(term, 2)
                g += term
                total += tnorm
                decay = tnorm / prev if prev > 0 else 0.0
                if decay >= 1.0:
                    growth_run += 1
                    if growth_run >= DIVERGENCE_RUN:
                        self.diverged = True
                        break
                else:
                    growth_run = 0
                prev = tnorm
                if tnorm < term_tol * total:
                    break
            self.Gs[n] = 0.5 * (g + g.T)
            self.trunc_K[n] = l
            decay = min(decay, 0.99)
            self.trunc_residual[n] = tnorm * decay / (1.0 - decay) if l else 0.0

            gu = np.eye(dk)
            p = np.eye(dk)
            for l in range(1, n + 1):
                p = p @ np.linalg.inv(self._BU[n - l])
                gu += (wu ** l) * (p.T @ p)
            self.Gu[n] = 0.5 * (gu + gu.T)

        self._Ls = np.array([np.linalg.cholesky(self.Gs[n]) for n in range(N + 1)])
        self._Lu = np.array([np.linalg.cholesky(self.Gu[n]) for n in range(N + 1)])

    # -- coordinates ----------------------------------------------------

    def frame_E(self, n: int) -> np.ndarray:
        """Basis of E_n, orthonormal for the Lyapunov inner product."""
        return self.frames.QE[n] @ np.linalg.inv(self._Ls[n]).T

    def frame_H(self, n: int) -> np.ndarray:
        return self.frames.QH[n] @ np.linalg.inv(self._Lu[n]).T

    def decompose(self, n: int, zeta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Coordinates (cE, cH) of zeta in the Lyapunov-orthonormal frames
        of the oblique splitting E_n + H_n."""
        k = self.split.k
        M = np.column_stack([self.frame_E(n), self.frame_H(n)])
        c = np.linalg.solve(M, np.asarray(zeta, dtype=float))
        return c[:k], c[k:]

    def reconstruct(self, n: int, cE: np.ndarray, cH: np.ndarray) -> np.ndarray:
        return self.frame_E(n) @ cE + self.frame_H(n) @ cH

    def inner(self, n: int, zeta: np.ndarray, zeta2: np.ndarray) -> float:
        cE, cH = self.decompose(n, zeta)
        dE, dH = self.decompose(n, zeta2)
        return float(cE @ dE + cH @ dH)

    def norm(self, n: int, zeta: np.ndarray) -> float:
        cE, cH = self.decompose(n, zeta)
        return max(float(np.linalg.norm(cE)), float(np.linalg.norm(cH)))

    def stable_norm(self, n: int, zeta: np.ndarray) -> float:
        return float(np.linalg.norm(self.decompose(n, zeta)[0]))

    def unstable_norm(self, n: int, zeta: np.ndarray) -> float:
        return float(np.linalg.norm(self.decompose(n, zeta)[1]))


def lyapunov_inner(metric: LyapunovMetric, n: int, zeta: np.ndarray,
                   zeta2: np.ndarray) -> float:
    if n > metric.horizon:
        raise DomainError(f"n = {n} beyond metric horizon {metric.horizon}")
    return metric.inner(n, zeta, zeta2)


# -- the uniformity function l ------------------------------------------


@dataclass
class LEstimate:
    """Smallest constant making the four hyperbolicity inequalities hold
    over the horizon, with per-base-index minima for diagnostics."""

    value: float
    per_n: np.ndarray
    iv_consistent: bool
    horizon: int
    infinite_flag: bool = False


def estimate_l(word: OmegaWord, x, params: PesinParams,
               horizon: int, split: OseledetsSplit | None = None) -> LEstimate:
    """Certify the contraction/expansion/angle inequalities.

    The minimal admissible assignment is computed in closed form: with
    c_n the pointwise minimum at base index n from inequalities
    (i)-(iii), the consistency inequality (iv) forces
    l(0) >= max_n c_n e^{-eps n}, and that bound is attained.
    """
    x = as_orbit_source(word, x)
    try:
        if split is None:
            split = stable_splitting(word, x, params, max(horizon, 64))
    except (GapViolationError, SingularCocycleError):
        return LEstimate(value=np.inf, per_n=np.zeros(0), iv_consistent=False,
                         horizon=horizon, infinite_flag=True)
    frames = propagate_frames(word, x, split, horizon)
    SA, BU = _step_matrices(frames)
    gammas = propagated_angles(frames)
    eps, a, b = params.eps, params.a, params.b
    N = horizon

    per_n = np.ones(N)
    bad = False
    for n in range(N):
        sa = np.eye(split.k)
        bu = np.eye(split.dim - split.k)
        c = 1.0
        for l in range(1, N - n + 1):
            sa = SA[n + l - 1] @ sa
            bu = BU[n + l - 1] @ bu
            smax = np.linalg.norm(sa, 2)
            svals = np.linalg.svd(bu, compute_uv=False)
            smin = float(svals[-1]) if svals.size else np.inf
            if not np.isfinite(smax) or smin <= 0.0 or not np.isfinite(smin):
                bad = True
                break
            c = max(c, smax * np.exp(-(a + eps) * l))
            c = max(c, np.exp((b - eps) * l) / smin)
            gam = gammas[n + l]
            if gam <= 0.0:
                bad = True
                break
            c = max(c, np.exp(-eps * l) / gam)
        if bad:
            break
        per_n[n] = c

    if bad:
        return LEstimate(value=np.inf, per_n=per_n, iv_consistent=False,
                         horizon=horizon, infinite_flag=True)

    value = float(np.max(per_n * np.exp(-eps * np.arange(N)))) if N else 1.0
    iv_ok = all(
        per_n[n + l] <= per_n[n] * np.exp(eps * l) * (1 + 1e-12)
        for n in range(N) for l in range(1, N - n)
    )
    return LEstimate(value=value, per_n=per_n, iv_consistent=iv_ok, horizon=horizon)


# -- the Lipschitz function r -------------------------------------------


@dataclass
class REstimate:
    value: float
    per_index: np.ndarray
    growth_ok: bool
    growth_margin: float
    violation_flag: bool = False


def estimate_r(word: OmegaWord, x, sample_count: int,
               horizon: int = 0, eps: float = 1e-3, seed: int = 0,
               safety: float = 1.1) -> REstimate:
    """Sampled Lipschitz constant of DF and DF^-1 on the unit ball.

    r' at each orbit index is the max difference quotient over sampled
    point pairs, times a 10% safety multiplier; r(n) is the
    eps-discounted sup over later indices, and the growth check
    verifies r(n) <= r(0) e^{eps n} with 5% tolerance.
    """
    x = as_orbit_source(word, x)
    d = x.base().size
    if sample_count < 2 * d:
        raise DomainError("sample_count must be at least 2 per dimension")
    rng = np.random.default_rng(seed)
    n_pairs = max(sample_count, 2 * d * d)
    rp = np.zeros(horizon + 1)
    violation = False
    for j in range(horizon + 1):
        frame = CenteredFrame(word, x, j)
        worst = 0.0
        for _ in range(n_pairs):
            v1 = rng.standard_normal(d)
            v1 *= rng.uniform(0, 1) ** (1 / d) / np.linalg.norm(v1)
            v2 = rng.standard_normal(d)
            v2 *= rng.uniform(0, 1) ** (1 / d) / np.linalg.norm(v2)
            q1 = frame.second_derivative_quotient(v1, v2)
            w1 = frame.value(v1)
            w2 = frame.value(v2)
            q2 = frame.inverse_second_derivative_quotient(w1, w2)
            if not (np.isfinite(q1) and np.isfinite(q2)):
                violation = True
                continue
            worst = max(worst, q1, q2)
        rp[j] = worst * safety

    disc = rp * np.exp(-eps * np.arange(horizon + 1))
    rn = np.array([np.max(disc[j:]) * np.exp(eps * j) for j in range(horizon + 1)])
    margin = float(np.max(rn * np.exp(-eps * np.arange(horizon + 1)) - rn[0]))
    growth_ok = margin <= 0.05 * max(rn[0], 1e-30) + 1e-30
    return REstimate(value=float(rn[0]), per_index=rp, growth_ok=growth_ok,
                     growth_margin=margin, violation_flag=violation)


# -- the inverse-derivative growth constant C_delta ---------------------


def estimate_Cdelta(word: OmegaWord, x, delta: float,
                    horizon: int) -> float:
    """C_delta = max_{n <= horizon} |D_0 F^-1_n| e^{-delta n}."""
    if not (0.0 < delta < 1.0):
        raise DomainError("delta must lie in (0, 1)")
    from .rds import step_jacobians

    orbit = as_orbit_source(word, x).points(horizon + 1)
    jacs = step_jacobians(word, orbit, horizon + 1)
    best = 0.0
    for n in range(horizon + 1):
        det = np.linalg.det(jacs[n])
        if det == 0.0 or not np.isfinite(det):
            raise SingularCocycleError(f"singular step Jacobian at index {n}")
        best = max(best, np.linalg.norm(np.linalg.inv(jacs[n]), 2) * np.exp(-delta * n))
    return float(best)


# -- membership ---------------------------------------------------------


@dataclass
class PesinCertificate:
    """Finite-horizon certificate for one (word, x) against fixed caps."""

    l_value: float
    r_value: float
    c_delta: float
    member: bool
    horizon: int
    k: int
    flags: list[str] = field(default_factory=list)


def pesin_membership(word: OmegaWord, x, params: PesinParams,
                     horizon: int, sample_count: int | None = None,
                     seed: int = 0) -> PesinCertificate:
    x = as_orbit_source(word, x)
    d = x.base().size
    if sample_count is None:
        sample_count = 2 * d * d
    flags: list[str] = []
    try:
        split = stable_splitting(word, x, params, max(horizon, 64))
    except (GapViolationError, SingularCocycleError) as exc:
        return PesinCertificate(l_value=np.inf, r_value=np.inf, c_delta=np.inf,
                                member=False, horizon=horizon, k=0,
                                flags=[f"splitting failed: {exc}"])
    if split.k != params.k:
        flags.append(f"dimension mismatch: split k = {split.k}, params k = {params.k}")
    if split.b_positive_flag:
        flags.append("b > 0: diagnostic gap, outside the certified regime")
    if split.low_confidence:
        flags.append("low-confidence splitting: boundary singular values too close")

    lest = estimate_l(word, x, params, horizon, split=split)
    rest = estimate_r(word, x, sample_count, horizon=min(horizon, 16),
                      eps=params.eps, seed=seed)
    cdel = estimate_Cdelta(word, x, params.eps, horizon)
    if lest.infinite_flag:
        flags.append("infinite l: hyperbolicity inequalities unsatisfiable")
    if rest.violation_flag:
        flags.append("non-finite Lipschitz quotient sample")

    member = (
        lest.value <= params.l_cap
        and rest.value <= params.r_cap
        and cdel <= params.c_cap
        and split.k == params.k
        and not lest.infinite_flag
    )
    return PesinCertificate(l_value=lest.value, r_value=rest.value, c_delta=cdel,
                            member=member, horizon=horizon, k=split.k, flags=flags)


# -- norm comparisons ---------------------------------------------------


@dataclass
class NormCheckResult:
    worst_margin: float
    A: float
    samples: int
    violations: int


def norm_equivalence_check(metric: LyapunovMetric, n: int, samples: int,
                           seed: int = 0) -> NormCheckResult:
    """Worst relative margin of (1/2)|z| <= ||z||'_n <= A e^{2 eps n} |z|.

    Non-positive margin means the two-sided bound held on every sample.
    """
    if n > metric.horizon:
        raise DomainError("n beyond metric horizon")
    rng = np.random.default_rng(seed)
    d = metric.split.dim
    A = lemma_A(metric.params.l_cap, metric.params.eps)
    hi = A * np.exp(2.0 * metric.params.eps * n)
    worst = -np.inf
    bad = 0
    for _ in range(samples):
        z = rng.standard_normal(d)
        nz = np.linalg.norm(z)
        ln = metric.norm(n, z)
        margin = max(0.5 * nz - ln, ln - hi * nz) / nz
        worst = max(worst, margin)
        if margin > 0:
            bad += 1
    return NormCheckResult(worst_margin=float(worst), A=A, samples=samples,
                           violations=bad)


@dataclass
class NormComparison:
    lhs: float
    rhs: float
    ratio: float
    bound: float
    holds: bool


def compare_norms_at_points(word: OmegaWord, z: np.ndarray, zp: np.ndarray,
                            n: int, pair: tuple[np.ndarray, np.ndarray],
                            params: PesinParams,
                            horizon: int | None = None) -> NormComparison:
    """Check that Lyapunov norms of the same displacement measured at two
    base points differ at most by the factor 2 A e^{2 eps n}.

    On R^d the centering maps are translations, so the displacement
    exp^-1(f^n z1) - exp^-1(f^n z2) is the same vector at both bases.
    """
    from .rds import iterate

    horizon = horizon if horizon is not None else max(n, 64)
    z1, z2 = (np.asarray(p, dtype=float) for p in pair)
    v = iterate(word, z1, n)[n] - iterate(word, z2, n)[n]
    norms = []
    for base in (np.asarray(z, dtype=float), np.asarray(zp, dtype=float)):
        split = stable_splitting(word, base, params, horizon)
        met = LyapunovMetric(word, base, split, params, n)
        norms.append(met.norm(n, v))
    bound = 2.0 * lemma_A(params.l_cap, params.eps) * np.exp(2.0 * params.eps * n)
    ratio = norms[0] / norms[1] if norms[1] > 0 else (np.inf if norms[0] > 0 else 1.0)
    return NormComparison(lhs=norms[0], rhs=norms[1], ratio=float(ratio),
                          bound=float(bound), holds=bool(ratio <= bound))
