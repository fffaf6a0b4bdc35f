"""Random dynamical systems on R^d: map families, sampled words, orbits,
tangent cocycles and trajectory-centered coordinate maps.

A word is the realized i.i.d. sequence of diffeomorphisms; all sampling
is a pure function of (family, seed, index) so horizons can be extended
without resampling prefixes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .errors import ConfigurationError, DomainError, OrbitDivergenceError

DIVERGENCE_GUARD = kernels.DIVERGENCE_GUARD
LOG_FLOOR = -50.0  # stands in for log(0) in assumption reports


def fd_jacobian(forward: Callable, x: np.ndarray) -> np.ndarray:
    """Central-difference Jacobian with step 1e-6 * max(1, |x|)."""
    x = np.asarray(x, dtype=float)
    h = 1e-6 * max(1.0, float(np.linalg.norm(x)))
    d = x.size
    cols = []
    for i in range(d):
        e = np.zeros(d)
        e[i] = h
        cols.append((np.asarray(forward(x + e)) - np.asarray(forward(x - e))) / (2 * h))
    return np.column_stack(cols)


@dataclass
class DiffeoMap:
    """One twice-differentiable diffeomorphism of R^d.

    jacobian may be omitted; a central-difference fallback is used then.
    second_derivative_bound(x, radius) should return the sup of the
    second-derivative operator norm over the ball B(x, radius); when
    omitted it is estimated by sampled difference quotients of the
    Jacobian.
    """

    forward: Callable[[np.ndarray], np.ndarray]
    inverse: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray] | None = None
    second_derivative_bound: Callable[[np.ndarray, float], float] | None = None
    params: np.ndarray | None = None

    def jac(self, x: np.ndarray) -> np.ndarray:
        if self.jacobian is not None:
            return np.asarray(self.jacobian(np.asarray(x, dtype=float)), dtype=float)
        return fd_jacobian(self.forward, x)

    def inverse_jac(self, y: np.ndarray) -> np.ndarray:
        x = np.asarray(self.inverse(np.asarray(y, dtype=float)), dtype=float)
        return np.linalg.inv(self.jac(x))

    def d2_sup(self, x: np.ndarray, radius: float, rng: np.random.Generator | None = None) -> float:
        if self.second_derivative_bound is not None:
            return float(self.second_derivative_bound(np.asarray(x, dtype=float), radius))
        return self._sampled_d2(self.forward, x, radius, rng)

    def _sampled_d2(self, fwd, x, radius, rng):
        rng = rng or np.random.default_rng(0)
        x = np.asarray(x, dtype=float)
        d = x.size
        best = 0.0
        for _ in range(2 * d * d):
            u = rng.standard_normal(d)
            u *= radius / np.linalg.norm(u)
            v = rng.standard_normal(d)
            v *= radius / np.linalg.norm(v)
            q = np.linalg.norm(
                fd_jacobian(fwd, x + u) - fd_jacobian(fwd, x + v), 2
            ) / max(np.linalg.norm(u - v), 1e-300)
            best = max(best, q)
        return best


@dataclass
class MapFamily:
    """A sampler of diffeomorphisms: the law of one random map.

    sample_params must be a pure function of (seed, index); make_map
    turns a parameter vector into a DiffeoMap.  Families whose steps fit
    the kernel form (x, y) -> (p0 x, p1 y + p2 sin x) set
    kernel_form='skew' and get the compiled fast paths.
    """

    name: str
    description: str
    dim: int
    sample_params: Callable[[int, int], np.ndarray]
    make_map: Callable[[np.ndarray], DiffeoMap]
    parameter_bounds: Sequence[tuple[float, float]] | None = None
    kernel_form: str | None = None

    def check_bounds(self, params: np.ndarray) -> None:
        if self.parameter_bounds is None:
            return
        for i, (lo, hi) in enumerate(self.parameter_bounds):
            if not (lo <= params[i] <= hi):
                raise ConfigurationError(
                    f"family '{self.name}' parameter {i} = {params[i]!r} "
                    f"outside declared bounds [{lo}, {hi}]"
                )


class OmegaWord:
    """A realized word of diffeomorphisms with left-shift support.

    The parameter cache is shared between a word and its shifts, so
    shift(w).map_at(i) is w.map_at(i+1) by construction and extending a
    word never changes already-realized entries.
    """

    def __init__(self, family: MapFamily, seed: int, length: int, offset: int = 0,
                 _cache: dict | None = None):
        self.family = family
        self.seed = int(seed)
        self.length = int(length)
        self.offset = int(offset)
        self._params = _cache if _cache is not None else {}
        self._maps: dict[int, DiffeoMap] = {}
        self.ensure(length)

    def ensure(self, n: int) -> None:
        """Realize parameters up to logical length n (lazily extendable)."""
        for i in range(self.offset, self.offset + n):
            if i not in self._params:
                p = np.asarray(self.family.sample_params(self.seed, i), dtype=float)
                self.family.check_bounds(p)
                self._params[i] = p
        if n > self.length:
            self.length = n

    def params_at(self, i: int) -> np.ndarray:
        self.ensure(i + 1)
        return self._params[self.offset + i]

    def map_at(self, i: int) -> DiffeoMap:
        j = self.offset + i
        if j not in self._maps:
            self._maps[j] = self.family.make_map(self.params_at(i))
        return self._maps[j]

    def shift(self, count: int = 1) -> "OmegaWord":
        if count < 0:
            raise DomainError("shift count must be nonnegative")
        w = OmegaWord(self.family, self.seed, max(self.length - count, 0),
                      offset=self.offset + count, _cache=self._params)
        w._maps = self._maps
        return w

    def step_params(self, n: int) -> np.ndarray | None:
        """(n, p) parameter array for kernel-form families, else None."""
        if self.family.kernel_form != "skew":
            return None
        self.ensure(n)
        return np.array([self._params[self.offset + i] for i in range(n)], dtype=float)


def sample_word(family: MapFamily, seed: int, n: int) -> OmegaWord:
    if n < 0:
        raise DomainError("word length must be nonnegative")
    return OmegaWord(family, seed, n)


class OrbitSource:
    """A base point together with a way to produce its forward orbit.

    Estimators accept either a bare point (orbit by forward iteration,
    divergence-guarded) or a source that can supply orbit points by
    other, better-conditioned means: on uniformly hyperbolic benchmarks
    the bounded orbit is exponentially unstable under forward iteration
    and must be reconstructed backward (see scenarios.BoundedSkewOrbit).
    """

    def base(self) -> np.ndarray:
        raise NotImplementedError

    def points(self, n: int) -> np.ndarray:
        raise NotImplementedError


class IteratedOrbit(OrbitSource):
    """Plain forward iteration of a start point, cached and extendable."""

    def __init__(self, word: OmegaWord, x: np.ndarray):
        self.word = word
        self.x = np.asarray(x, dtype=float)
        self._orbit = self.x[None, :].copy()

    def base(self) -> np.ndarray:
        return self.x

    def points(self, n: int) -> np.ndarray:
        if self._orbit.shape[0] <= n:
            self._orbit = iterate(self.word, self.x, n)
        return self._orbit[: n + 1]


def as_orbit_source(word: OmegaWord, x) -> OrbitSource:
    if isinstance(x, OrbitSource):
        return x
    return IteratedOrbit(word, x)


def iterate(word: OmegaWord, x: np.ndarray, n: int) -> np.ndarray:
    """Orbit f^0 x .. f^n x, shape (n+1, d)."""
    x = np.asarray(x, dtype=float)
    word.ensure(n)
    params = word.step_params(n)
    if params is not None and x.size == 2:
        orbit, last = kernels.skew_orbit(params, float(x[0]), float(x[1]), n)
        if last < n:
            raise OrbitDivergenceError("orbit diverged", last)
        return orbit
    orbit = np.empty((n + 1, x.size))
    orbit[0] = x
    cur = x
    for j in range(n):
        cur = np.asarray(word.map_at(j).forward(cur), dtype=float)
        if not np.all(np.isfinite(cur)) or np.max(np.abs(cur)) > DIVERGENCE_GUARD:
            raise OrbitDivergenceError("orbit diverged", j)
        orbit[j + 1] = cur
    return orbit


@dataclass
class CocycleBlock:
    """T^l_n(w, x): the derivative of the l-step composition started at
    index n, evaluated along the orbit of x."""

    base_point: np.ndarray
    start: int
    length: int
    matrix: np.ndarray


def step_jacobians(word: OmegaWord, orbit: np.ndarray, n: int) -> np.ndarray:
    """Stack J_j = Df_j(orbit[j]) for j < n."""
    params = word.step_params(n)
    if params is not None and orbit.shape[1] == 2:
        return kernels.skew_step_jacobians(params, orbit, n)
    return np.array([word.map_at(j).jac(orbit[j]) for j in range(n)])


def cocycle_block(word: OmegaWord, x: np.ndarray, n: int, l: int) -> CocycleBlock:
    x = np.asarray(x, dtype=float)
    if l < 0 or n < 0:
        raise DomainError("cocycle indices must be nonnegative")
    orbit = iterate(word, x, n + l)
    jacs = step_jacobians(word, orbit, n + l)
    m = np.eye(x.size)
    for j in range(n, n + l):
        m = jacs[j] @ m
    return CocycleBlock(base_point=x, start=n, length=l, matrix=m)


class CenteredFrame:
    """Evolution centered on the orbit of x: F_n(v) = exp^-1 o f_n o exp.

    For kernel-form families the centered step uses the identity
    sin(x+v)-sin(x) = 2 cos(x+v/2) sin(v/2), which keeps full relative
    precision for deviations many orders below the orbit scale.
    """

    def __init__(self, word: OmegaWord, x, n: int,
                 domain_radius: float = np.inf):
        self.word = word
        source = as_orbit_source(word, x)
        self.x = source.base()
        self.n = int(n)
        self.domain_radius = float(domain_radius)
        self.orbit = source.points(self.n + 1)

    def _check(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if np.linalg.norm(v) > self.domain_radius:
            raise DomainError(
                f"|v| = {np.linalg.norm(v):.3g} exceeds frame domain radius "
                f"{self.domain_radius:.3g}"
            )
        return v

    def value(self, v: np.ndarray) -> np.ndarray:
        v = self._check(v)
        p = self.word.family.kernel_form == "skew" and v.size == 2
        if p:
            a, b, c = self.word.params_at(self.n)
            x = self.orbit[self.n, 0]
            return np.array([
                a * v[0],
                b * v[1] + c * 2.0 * np.cos(x + 0.5 * v[0]) * np.sin(0.5 * v[0]),
            ])
        fwd = self.word.map_at(self.n).forward
        return np.asarray(fwd(self.orbit[self.n] + v), dtype=float) - self.orbit[self.n + 1]

    def derivative(self, v: np.ndarray) -> np.ndarray:
        v = self._check(v)
        return self.word.map_at(self.n).jac(self.orbit[self.n] + v)

    def inverse_value(self, w: np.ndarray) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        if self.word.family.kernel_form == "skew" and w.size == 2:
            a, b, c = self.word.params_at(self.n)
            x = self.orbit[self.n, 0]
            ux = w[0] / a
            uy = (w[1] - c * 2.0 * np.cos(x + 0.5 * ux) * np.sin(0.5 * ux)) / b
            return np.array([ux, uy])
        inv = self.word.map_at(self.n).inverse
        return np.asarray(inv(self.orbit[self.n + 1] + w), dtype=float) - self.orbit[self.n]

    def inverse_derivative(self, w: np.ndarray) -> np.ndarray:
        u = self.inverse_value(w)
        return np.linalg.inv(self.derivative(u))

    def second_derivative_quotient(self, v1: np.ndarray, v2: np.ndarray) -> float:
        """|DF(v1) - DF(v2)| / |v1 - v2|, the sampled Lipschitz quotient."""
        gap = np.linalg.norm(np.asarray(v1, dtype=float) - np.asarray(v2, dtype=float))
        if gap == 0.0:
            return 0.0
        return float(np.linalg.norm(self.derivative(v1) - self.derivative(v2), 2) / gap)

    def inverse_second_derivative_quotient(self, w1: np.ndarray, w2: np.ndarray) -> float:
        gap = np.linalg.norm(np.asarray(w1, dtype=float) - np.asarray(w2, dtype=float))
        if gap == 0.0:
            return 0.0
        return float(
            np.linalg.norm(self.inverse_derivative(w1) - self.inverse_derivative(w2), 2) / gap
        )


def centered_map(frame: CenteredFrame, v: np.ndarray) -> np.ndarray:
    """Value of the trajectory-centered map; centered_map(frame, 0) = 0."""
    return frame.value(v)


@dataclass
class AssumptionReport:
    """Empirical integrability check of the three standing assumptions."""

    mean_log_plus_df: float
    mean_log_d2: float
    mean_log_d2_inv: float
    mean_log_df_inv: float
    samples: int
    overflow_flag: bool
    violation_flag: bool
    log_floor_engaged: bool

    def ok(self) -> bool:
        return not (self.overflow_flag or self.violation_flag)


def validate_assumptions(family: MapFamily,
                         mu_sampler: Callable[[np.random.Generator], np.ndarray],
                         sample_budget: int,
                         seed: int = 0) -> AssumptionReport:
    """Monte Carlo estimate of the integrability assumptions.

    Samples (map, point) pairs, evaluating log+ |Df|, log sup |D^2 F|
    over the unit ball (and for the inverse), and log |Df^-1|.  A zero
    second-derivative sup is clamped at LOG_FLOOR; non-finite samples
    set the violation flag instead of crashing.
    """
    if sample_budget < 1:
        raise DomainError("sample_budget must be >= 1")
    rng = np.random.default_rng(seed)
    s1, s2, s2i, s3 = [], [], [], []
    overflow = violation = floor_engaged = False
    for i in range(sample_budget):
        fmap = family.make_map(np.asarray(family.sample_params(seed, i), dtype=float))
        x = np.asarray(mu_sampler(rng), dtype=float)
        try:
            jac = fmap.jac(x)
            njac = np.linalg.norm(jac, 2)
            ninv = np.linalg.norm(np.linalg.inv(jac), 2)
            d2 = fmap.d2_sup(x, 1.0, rng)
            y = np.asarray(fmap.forward(x), dtype=float)
            if fmap.second_derivative_bound is not None:
                d2i = _inverse_d2_bound(fmap, y)
            else:
                d2i = DiffeoMap(fmap.inverse, fmap.forward)._sampled_d2(fmap.inverse, y, 1.0, rng)
        except (FloatingPointError, np.linalg.LinAlgError, OverflowError):
            violation = True
            continue
        vals = [njac, ninv, d2, d2i]
        if not all(np.isfinite(v) for v in vals):
            violation = True
            continue
        if max(vals) > DIVERGENCE_GUARD:
            overflow = True
        s1.append(max(np.log(njac), 0.0))
        s3.append(np.log(ninv))
        for sup, acc in ((d2, s2), (d2i, s2i)):
            if sup <= 0.0 or np.log(sup) < LOG_FLOOR:
                acc.append(LOG_FLOOR)
                floor_engaged = True
            else:
                acc.append(np.log(sup))
    if not s1:
        violation = True
        s1 = s2 = s2i = s3 = [np.nan]
    return AssumptionReport(
        mean_log_plus_df=float(np.mean(s1)),
        mean_log_d2=float(np.mean(s2)),
        mean_log_d2_inv=float(np.mean(s2i)),
        mean_log_df_inv=float(np.mean(s3)),
        samples=len(s1),
        overflow_flag=overflow,
        violation_flag=violation,
        log_floor_engaged=floor_engaged,
    )


def _inverse_d2_bound(fmap: DiffeoMap, y: np.ndarray) -> float:
    """Exact inverse second-derivative sup when the family provides one
    through the params attribute (kernel-form maps), else sampled."""
    if fmap.params is not None and fmap.params.size == 3:
        a, b, c = fmap.params
        # inverse of the skew step: (X, Y) -> (X/a, (Y - c sin(X/a))/b);
        # only d2/dX2 is nonzero with norm |c sin(X/a)| / (b a^2)
        lo = (y[0] - 1.0) / a
        hi = (y[0] + 1.0) / a
        return abs(c) * _sup_abs_sin(min(lo, hi), max(lo, hi)) / (abs(b) * a * a)
    return DiffeoMap(fmap.inverse, fmap.forward)._sampled_d2(fmap.inverse, y, 1.0, None)


def _sup_abs_sin(lo: float, hi: float) -> float:
    """sup of |sin| over [lo, hi]."""
    if hi - lo >= np.pi:
        return 1.0
    k_lo = np.ceil((lo - np.pi / 2) / np.pi)
    k_hi = np.floor((hi - np.pi / 2) / np.pi)
    if k_hi >= k_lo:
        return 1.0
    return max(abs(np.sin(lo)), abs(np.sin(hi)))
