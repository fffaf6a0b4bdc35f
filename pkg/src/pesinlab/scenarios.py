"""Benchmark systems S1-S4 and their closed-form oracles.

All four scenarios (plus the identity family) are instances of the
parametric step

    (x, y) |-> (a x, b y + c sin x)

with per-index constants (a, b, c).  The stable leaf through (x0, y0)
of such a word is the graph

    y(x) = y0 - sum_k (prod_{j<=k} b_j)^-1 [h_k(x_k) - h_k(x_k^0)]

with h_k(u) = c_k sin u and x_k = (prod_{j<k} a_j) x; the series is the
independent oracle for every stable-manifold and holonomy test, and the
code truncates it by rigorous geometric tail bounds, never fixed counts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigurationError, DomainError
from .rds import DiffeoMap, MapFamily, OmegaWord, OrbitSource

TAIL_TOL = 1e-12


def _skew_map(params: np.ndarray) -> DiffeoMap:
    a, b, c = (float(params[0]), float(params[1]), float(params[2]))

    def forward(p):
        return np.array([a * p[0], b * p[1] + c * np.sin(p[0])])

    def inverse(q):
        x = q[0] / a
        return np.array([x, (q[1] - c * np.sin(x)) / b])

    def jacobian(p):
        return np.array([[a, 0.0], [c * np.cos(p[0]), b]])

    def d2_bound(p, radius):
        return abs(c) * _sup_abs_sin(p[0] - radius, p[0] + radius)

    return DiffeoMap(forward=forward, inverse=inverse, jacobian=jacobian,
                     second_derivative_bound=d2_bound,
                     params=np.array([a, b, c]))


def _sup_abs_sin(lo: float, hi: float) -> float:
    if hi - lo >= np.pi:
        return 1.0
    k_lo = np.ceil((lo - np.pi / 2) / np.pi)
    k_hi = np.floor((hi - np.pi / 2) / np.pi)
    if k_hi >= k_lo:
        return 1.0
    return max(abs(np.sin(lo)), abs(np.sin(hi)))


def family_identity() -> MapFamily:
    return family_constant(1.0, 1.0, 0.0, name="identity",
                           description="identity map at every index")


def family_constant(a: float = 2.0, b: float = 0.5, c: float = 0.0,
                    name: str = "S1",
                    description: str = "constant diagonal diag(2, 1/2)") -> MapFamily:
    p = np.array([a, b, c])

    return MapFamily(
        name=name, description=description, dim=2,
        sample_params=lambda seed, index: p,
        make_map=_skew_map,
        parameter_bounds=[(a, a), (b, b), (c, c)],
        kernel_form="skew",
    )


def family_iid_diag(unstable_range: tuple[float, float] = (1.8, 2.2),
                    stable_range: tuple[float, float] = (0.4, 0.6)) -> MapFamily:
    """S2: independent diagonal maps diag(b_i, a_i), both entries
    log-uniform on their ranges (unstable axis first, matching S1)."""
    lu = np.log(unstable_range)
    ls = np.log(stable_range)

    def sample(seed, index):
        rng = np.random.default_rng((seed, index))
        return np.array([np.exp(rng.uniform(lu[0], lu[1])),
                         np.exp(rng.uniform(ls[0], ls[1])),
                         0.0])

    return MapFamily(
        name="S2", description="iid log-uniform diagonal maps", dim=2,
        sample_params=sample, make_map=_skew_map,
        parameter_bounds=[(unstable_range[0], unstable_range[1]),
                          (stable_range[0], stable_range[1]), (0.0, 0.0)],
        kernel_form="skew",
    )


def family_skew(a: float = 0.5, b: float = 2.0, amplitude: float = 1.0) -> MapFamily:
    """S3: the constant skew map (x, y) -> (x/2, 2y + sin x)."""
    if not abs(a) < 1 < abs(b):
        raise ConfigurationError("skew family needs |a| < 1 < |b|")
    return family_constant(a, b, amplitude, name="S3",
                           description="constant hyperbolic skew map")


def family_random_skew(a_range: tuple[float, float] = (0.4, 0.6),
                       b_range: tuple[float, float] = (1.8, 2.2),
                       c_range: tuple[float, float] = (0.5, 1.0)) -> MapFamily:
    """S4: per-index uniform (a_j, b_j, c_j)."""
    if not (abs(a_range[1]) < 1 < abs(b_range[0])):
        raise ConfigurationError("random skew family needs sup|a| < 1 < inf|b|")

    def sample(seed, index):
        rng = np.random.default_rng((seed, index))
        return np.array([rng.uniform(*a_range), rng.uniform(*b_range),
                         rng.uniform(*c_range)])

    return MapFamily(
        name="S4", description="iid uniform hyperbolic skew maps", dim=2,
        sample_params=sample, make_map=_skew_map,
        parameter_bounds=[a_range, b_range, c_range],
        kernel_form="skew",
    )


@dataclass
class ScenarioSpec:
    """Named benchmark scenario with parameter overrides and a seed."""

    name: str
    seed: int = 0
    parameters: dict = field(default_factory=dict)

    def family(self) -> MapFamily:
        key = self.name.lower()
        if key not in _BUILDERS:
            raise ConfigurationError(
                f"unknown scenario '{self.name}'; known: {sorted(_BUILDERS)}"
            )
        return _BUILDERS[key](**self.parameters)


_BUILDERS = {
    "identity": family_identity,
    "s1": family_constant,
    "s2": family_iid_diag,
    "s3": family_skew,
    "s4": family_random_skew,
}


@dataclass
class OracleResult:
    """A closed-form reference value with its truncation bookkeeping."""

    quantity: str
    value: float
    truncation: int
    error_bound: float


def _series_terms(word: OmegaWord, kmax: int):
    """Cumulative products A_k = prod_{j<k} a_j and B_k = prod_{j<=k} b_j
    together with amplitudes c_k, realized from the word."""
    params = word.step_params(kmax + 1)
    a = params[:, 0]
    b = params[:, 1]
    c = params[:, 2]
    acum = np.concatenate([[1.0], np.cumprod(a)])[: kmax + 1]
    bcum = np.cumprod(b)
    return acum, bcum, c


def skew_leaf_oracle(word: OmegaWord, base: np.ndarray, x: float,
                     tail_tol: float = TAIL_TOL, kmax: int = 200) -> OracleResult:
    """Stable-leaf ordinate y(x) through base, by the contraction series."""
    if word.family.kernel_form != "skew":
        raise DomainError("leaf oracle applies to skew-form words only")
    base = np.asarray(base, dtype=float)
    acum, bcum, c = _series_terms(word, kmax)
    ratio = _tail_ratio(word)
    total = 0.0
    used = 0
    bound = np.inf
    for k in range(kmax):
        term = (np.sin(acum[k] * x) - np.sin(acum[k] * base[0])) * c[k] / bcum[k]
        total += term
        used = k + 1
        # rigorous tail: |h'| <= c, |x_k - x_k^0| decays by a, 1/B by 1/b
        mag = abs(c[k]) * abs(acum[k]) * abs(x - base[0]) / bcum[k]
        bound = mag * ratio / (1.0 - ratio)
        if bound < tail_tol:
            break
    return OracleResult("leaf_y", float(base[1] - total), used, float(bound))


def skew_leaf_tangent_oracle(word: OmegaWord, base: np.ndarray,
                             tail_tol: float = TAIL_TOL, kmax: int = 200) -> OracleResult:
    """dy/dx of the stable leaf at its base point: the direction of the
    slow Oseledets subspace."""
    base = np.asarray(base, dtype=float)
    acum, bcum, c = _series_terms(word, kmax)
    ratio = _tail_ratio(word)
    slope = 0.0
    used = 0
    bound = np.inf
    for k in range(kmax):
        slope -= c[k] * np.cos(acum[k] * base[0]) * acum[k] / bcum[k]
        used = k + 1
        mag = abs(c[k]) * abs(acum[k]) / bcum[k]
        bound = mag * ratio / (1.0 - ratio)
        if bound < tail_tol:
            break
    return OracleResult("leaf_slope", float(slope), used, float(bound))


def _tail_ratio(word: OmegaWord) -> float:
    lo, hi = word.family.parameter_bounds[0]
    blo, _ = word.family.parameter_bounds[1]
    sup_a = max(abs(lo), abs(hi))
    inf_b = abs(blo)
    if inf_b <= sup_a:
        raise DomainError("tail ratio undefined: family not uniformly hyperbolic")
    return sup_a / inf_b


def skew_holonomy_oracle(word: OmegaWord, c1: float, c2: float,
                         tail_tol: float = TAIL_TOL, kmax: int = 200) -> OracleResult:
    """Offset of the Poincare translation between the vertical
    transversals x = c1 and x = c2; its Jacobian is identically 1."""
    acum, bcum, c = _series_terms(word, kmax)
    ratio = _tail_ratio(word)
    delta = 0.0
    used = 0
    bound = np.inf
    for k in range(kmax):
        delta -= (np.sin(acum[k] * c2) - np.sin(acum[k] * c1)) * c[k] / bcum[k]
        used = k + 1
        mag = abs(c[k]) * abs(acum[k]) * abs(c2 - c1) / bcum[k]
        bound = mag * ratio / (1.0 - ratio)
        if bound < tail_tol:
            break
    return OracleResult("holonomy_offset", float(delta), used, float(bound))


class BoundedSkewOrbit(OrbitSource):
    """Exact bounded orbit of a skew word through the x-fibre of x0.

    The x-coordinate iterates forward (it contracts, so this is exact);
    the y-coordinate of the bounded trajectory solves the backward
    recursion y_j = (y_{j+1} - c_j sin x_j) / b_j, which is stable since
    |b| > 1.  Forward iteration of the same point would escape the
    divergence guard after ~log2(guard/ulp) steps.
    """

    TAIL = 64

    def __init__(self, word: OmegaWord, x0: float):
        if word.family.kernel_form != "skew":
            raise DomainError("bounded orbits require a skew-form word")
        lo, hi = word.family.parameter_bounds[0]
        blo = word.family.parameter_bounds[1][0]
        if not (max(abs(lo), abs(hi)) < 1.0 < abs(blo)):
            raise DomainError("bounded orbit needs |a| < 1 < |b|")
        self.word = word
        self.x0 = float(x0)
        self._orbit = self._build(1)

    def _build(self, n: int) -> np.ndarray:
        total = n + self.TAIL
        params = self.word.step_params(total)
        xs = np.empty(total + 1)
        xs[0] = self.x0
        for j in range(total):
            xs[j + 1] = params[j, 0] * xs[j]
        ys = np.zeros(total + 1)
        for j in range(total - 1, -1, -1):
            ys[j] = (ys[j + 1] - params[j, 2] * np.sin(xs[j])) / params[j, 1]
        return np.column_stack([xs[: n + 1], ys[: n + 1]])

    def base(self) -> np.ndarray:
        return self._orbit[0]

    def points(self, n: int) -> np.ndarray:
        if self._orbit.shape[0] <= n:
            self._orbit = self._build(n)
        return self._orbit[: n + 1]


def stable_start(word: OmegaWord, x0: float = 0.3, y0: float = 0.0,
                 kmax: int = 400) -> np.ndarray:
    """A start point whose forward orbit stays bounded.

    Hyperbolic scenarios on R^2 have full orbits only along the global
    stable set; everywhere else the expanding coordinate escapes the
    divergence guard.  For skew words (|a| < 1 < |b|) the bounded graph
    is y*(x) = -sum_k (prod_{j<=k} b_j)^-1 h_k(x_k); for words expanding
    the first axis the bounded set is the y-axis.
    """
    lo, hi = word.family.parameter_bounds[0]
    sup_a = max(abs(lo), abs(hi))
    blo, bhi = word.family.parameter_bounds[1]
    if sup_a < 1.0 < abs(blo):
        acum, bcum, c = _series_terms(word, kmax)
        ratio = _tail_ratio(word)
        total = 0.0
        for k in range(kmax):
            total -= c[k] * np.sin(acum[k] * x0) / bcum[k]
            if abs(c[k] * acum[k] / bcum[k]) * ratio / (1 - ratio) < 1e-15:
                break
        return np.array([x0, total])
    if abs(bhi) < 1.0 < abs(lo):
        return np.array([0.0, y0])
    return np.array([x0, y0])


def brute_force_stable_pairs(word: OmegaWord, x: np.ndarray, grid: np.ndarray,
                             horizon: int, margin: float = 1e-3):
    """Exhaustive forward-iteration classification of grid points.

    Returns (member_mask, rates, flags); a point is a member when the
    running separation slope over the last half of the horizon stays
    below -margin.  flags: 0 clean, 1 diverged, 2 separation hit zero.
    """
    x = np.asarray(x, dtype=float)
    grid = np.asarray(grid, dtype=float).reshape(-1, 2)
    if grid.shape[0] == 0:
        return (np.zeros(0, dtype=bool), np.zeros(0), np.zeros(0, dtype=np.int64))
    params = word.step_params(horizon)
    orbit, last = kernels.skew_orbit(params, float(x[0]), float(x[1]), horizon)
    if last < horizon:
        raise DomainError("base orbit diverged; shrink the horizon")
    rates, flags = kernels.separation_rates(params, orbit, grid, horizon,
                                            kernels.DIVERGENCE_GUARD)
    member = (rates < -margin) | (flags == 2)
    member &= flags != 1
    return member, rates, flags
