"""Multiplicative-ergodic-theorem data: Lyapunov spectra, multiplicities,
and the stable/unstable splitting E0 + H0 with spectral-gap parameters.

The spectrum estimator runs two QR sweeps.  A reverse sweep over the
transposed step Jacobians converges to the right-singular flag of the
cocycle (fastest direction first); the forward sweep is then seeded
with that flag, slowest column first.  Seeding with the covariant flag
removes the O(1/n) alignment transient of a plain identity-seeded
sweep: on triangular benchmark cocycles the per-step R diagonals are
the diagonal multipliers themselves, so finite-horizon estimates match
the asymptotic exponents to roundoff.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DomainError, GapViolationError, SingularCocycleError
from .rds import OmegaWord, as_orbit_source, step_jacobians


def epsilon_ceiling(a: float, b: float, d: int) -> float:
    """Largest admissible epsilon for the gap [a, b] in dimension d."""
    if a >= b:
        raise DomainError(f"need a < b, got a={a}, b={b}")
    return min(1.0, (b - a) / (200.0 * d))


@dataclass
class PesinParams:
    """Gap, dimension and uniformity caps fixing one Pesin set."""

    a: float
    b: float
    k: int
    eps: float
    l_cap: float = 1.0
    r_cap: float = 1.0
    c_cap: float = 1.0

    def __post_init__(self):
        if self.a >= self.b:
            raise DomainError(f"need a < b, got a={self.a}, b={self.b}")
        if self.eps <= 0:
            raise DomainError("eps must be positive")
        if self.k < 1:
            raise DomainError("k must be >= 1")
        if min(self.l_cap, self.r_cap, self.c_cap) < 0:
            raise DomainError("caps must be nonnegative")

    def validate_eps(self, d: int) -> None:
        ceil = epsilon_ceiling(self.a, self.b, d)
        if self.eps > ceil:
            raise DomainError(
                f"eps = {self.eps} exceeds ceiling {ceil} for gap "
                f"[{self.a}, {self.b}] in dimension {d}"
            )

    @property
    def b_positive(self) -> bool:
        return self.b > 0


@dataclass
class SpectrumEstimate:
    """Estimated exponents (ascending), their grouping, and diagnostics."""

    exponents: np.ndarray
    grouped: list[tuple[float, int]]
    horizon: int
    slope_diagnostic: np.ndarray
    logdet_rate: float
    underflow_flag: bool = False

    @property
    def dim(self) -> int:
        return self.exponents.size


def default_group_tol(n: int) -> float:
    return max(1e-3, 5.0 / np.sqrt(n))


def _group(exponents: np.ndarray, tol: float) -> list[tuple[float, int]]:
    groups: list[tuple[float, int]] = []
    for rho in exponents:
        if groups and abs(rho - groups[-1][0] * 1.0) < tol:
            lam, m = groups[-1]
            groups[-1] = ((lam * m + rho) / (m + 1), m + 1)
        else:
            groups.append((float(rho), 1))
    return groups


def _sweeps(word: OmegaWord, x, n: int, qr_stride: int,
            checks: np.ndarray | None = None):
    """Shared two-sweep machinery: returns (logs ascending, seed frame V
    ordered slowest-first, check logs, min diagonal, jacobian stack)."""
    orbit = as_orbit_source(word, x).points(n)
    jacs = np.ascontiguousarray(step_jacobians(word, orbit, n))
    logs_desc, v_fast, min_diag_rev = kernels.qr_sweep_adjoint_reverse(jacs, qr_stride)
    v_slow_first = np.ascontiguousarray(v_fast[:, ::-1])
    if checks is None:
        checks = np.zeros(0, dtype=np.int64)
    logs, qfin, check_logs, min_diag = kernels.qr_sweep(
        jacs, v_slow_first, qr_stride, checks
    )
    return logs, v_fast, check_logs, min(min_diag, min_diag_rev), jacs, orbit


def lyapunov_spectrum(word: OmegaWord, x, n: int,
                      qr_stride: int = 1,
                      group_tol: float | None = None) -> SpectrumEstimate:
    """Exponent estimates from the seeded, re-orthogonalized cocycle sweep."""
    if not (1 <= qr_stride <= n):
        raise DomainError("need n >= qr_stride >= 1")
    x = as_orbit_source(word, x)
    d = x.base().size
    ncheck = 8
    checks = np.unique(np.linspace(n // 2, n, ncheck).astype(np.int64))
    checks = checks[checks >= 1]
    logs, _, check_logs, min_diag, jacs, _ = _sweeps(word, x, n, qr_stride, checks)

    if min_diag == 0.0 or not np.all(np.isfinite(logs)):
        raise SingularCocycleError(
            "cocycle rank collapse: an orthogonalized diagonal entry underflowed"
        )
    underflow = bool(np.min(logs) < np.log(np.finfo(float).tiny))

    rho = np.sort(logs / n)
    order = np.argsort(logs)
    # running estimates at the checkpoints, per sorted exponent
    running = check_logs[:, order] / checks[:, None]
    slopes = np.zeros(d)
    if checks.size >= 2:
        t = checks.astype(float)
        t = t - t.mean()
        denom = float(t @ t)
        for i in range(d):
            slopes[i] = float(t @ (running[:, i] - running[:, i].mean())) / denom

    logdet = 0.0
    for j in range(jacs.shape[0]):
        det = np.linalg.det(jacs[j])
        if det == 0.0:
            raise SingularCocycleError("singular step Jacobian")
        logdet += np.log(abs(det))

    tol = default_group_tol(n) if group_tol is None else group_tol
    return SpectrumEstimate(
        exponents=rho,
        grouped=_group(rho, tol),
        horizon=n,
        slope_diagnostic=slopes,
        logdet_rate=logdet / n,
        underflow_flag=underflow,
    )


@dataclass
class OseledetsSplit:
    """Orthonormal bases of E0 (slow singular directions below the gap)
    and H0 = E0-perp, plus the data needed to propagate them."""

    a: float
    b: float
    k: int
    E0: np.ndarray
    H0: np.ndarray
    horizon: int
    exponents: np.ndarray
    b_positive_flag: bool = False
    low_confidence: bool = False

    @property
    def dim(self) -> int:
        return self.E0.shape[0]


def stable_splitting(word: OmegaWord, x, params: PesinParams,
                     horizon: int, qr_stride: int = 1) -> OseledetsSplit:
    """Split T_x R^d into directions growing slower than e^{an} and their
    orthogonal complement, from the right-singular flag of the cocycle."""
    x = as_orbit_source(word, x)
    d = x.base().size
    params.validate_eps(d)
    logs, v_fast, _, min_diag, _, _ = _sweeps(word, x, horizon, qr_stride, None)
    if min_diag == 0.0 or not np.all(np.isfinite(logs)):
        raise SingularCocycleError("cocycle rank collapse during splitting")

    rho = logs / horizon  # rates of the seeded sweep, may be unsorted
    rho_sorted = np.sort(rho)
    inside = [r for r in rho_sorted if params.a <= r <= params.b]
    if inside:
        raise GapViolationError(
            f"exponent(s) {inside} inside the gap [{params.a}, {params.b}]"
        )
    k = int(np.sum(rho_sorted < params.a))
    if k == 0:
        raise GapViolationError(
            f"no exponent below a = {params.a}; stable space is trivial"
        )

    # v_fast columns are ordered fastest first; the slow block spans E0
    E0 = np.ascontiguousarray(v_fast[:, d - k:])
    H0 = np.ascontiguousarray(v_fast[:, : d - k])

    low_conf = False
    if k < d:
        # boundary singular values should straddle the gap by e^{(b-a)n/2}
        desc = np.sort(rho)[::-1]
        gap_measured = (desc[d - k - 1] - desc[d - k]) * horizon
        low_conf = gap_measured < (params.b - params.a) * horizon / 2.0
    return OseledetsSplit(
        a=params.a, b=params.b, k=k, E0=E0, H0=H0, horizon=horizon,
        exponents=rho_sorted,
        b_positive_flag=params.b_positive,
        low_confidence=low_conf,
    )


def orthonormalize(frame: np.ndarray) -> np.ndarray:
    """QR-orthonormalization with a positive-diagonal sign convention."""
    q, r = np.linalg.qr(frame)
    sign = np.sign(np.diag(r))
    sign[sign == 0] = 1.0
    return q * sign


@dataclass
class SplitFrames:
    """Orbit, step Jacobians, and propagated orthonormal frames QE_n of
    E_n = Df^n E0 and QH_n of H_n = Df^n H0 for n <= horizon."""

    orbit: np.ndarray
    jacs: np.ndarray
    QE: np.ndarray
    QH: np.ndarray

    @property
    def horizon(self) -> int:
        return self.QE.shape[0] - 1


def propagate_frames(word: OmegaWord, x, split: OseledetsSplit,
                     horizon: int) -> SplitFrames:
    source = as_orbit_source(word, x)
    d = source.base().size
    orbit = source.points(horizon)
    jacs = step_jacobians(word, orbit, horizon)
    k = split.k
    QE = np.empty((horizon + 1, d, k))
    QH = np.empty((horizon + 1, d, d - k))
    QE[0] = split.E0
    QH[0] = split.H0
    for n in range(horizon):
        QE[n + 1] = orthonormalize(jacs[n] @ QE[n])
        QH[n + 1] = orthonormalize(jacs[n] @ QH[n])
    return SplitFrames(orbit=orbit, jacs=jacs, QE=QE, QH=QH)


def subspace_angle(E: np.ndarray, F: np.ndarray) -> float:
    """Angle between two subspaces: the infimum over unit pairs of the
    arccos of their scalar product (smallest principal angle)."""
    E = np.atleast_2d(np.asarray(E, dtype=float))
    F = np.atleast_2d(np.asarray(F, dtype=float))
    if E.shape[0] == 1:
        E = E.T
    if F.shape[0] == 1:
        F = F.T
    if E.shape[1] == 0 or F.shape[1] == 0:
        raise DomainError("subspace_angle needs non-trivial subspaces")
    qe = orthonormalize(E)
    qf = orthonormalize(F)
    s = np.linalg.svd(qe.T @ qf, compute_uv=False)
    c = min(1.0, float(np.max(s))) if s.size else 0.0
    return float(np.arccos(c))


def propagated_angles(frames: SplitFrames) -> np.ndarray:
    """gamma(E_n, H_n) for every n; used for the angle-asymptotics checks."""
    return np.array(
        [subspace_angle(frames.QE[n], frames.QH[n]) for n in range(frames.QE.shape[0])]
    )
