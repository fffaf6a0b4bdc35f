"""Structured error types.

Everything numerical that can fail in a foreseeable way raises one of
these instead of crashing with a bare exception; user-facing drivers map
them to exit codes.
"""

from __future__ import annotations


class PesinLabError(Exception):
    """Base class for all library errors."""


class ConfigurationError(PesinLabError):
    """Bad user input: out-of-bounds parameters, malformed config files."""

    def __init__(self, message: str, *, line: int | None = None, field: str | None = None):
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if field is not None:
            loc.append(f"field '{field}'")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.line = line
        self.field = field


class DomainError(PesinLabError):
    """An argument lies outside the mathematical domain of an operation."""


class OrbitDivergenceError(PesinLabError):
    """An orbit left the finite/guarded region of R^d.

    Carries the last index at which the orbit was still finite.
    """

    def __init__(self, message: str, last_finite_index: int):
        super().__init__(f"{message} (last finite index {last_finite_index})")
        self.last_finite_index = last_finite_index


class SingularCocycleError(PesinLabError):
    """Rank collapse: a cocycle factor became numerically singular."""


class GapViolationError(PesinLabError):
    """A Lyapunov exponent fell inside the requested spectral gap [a, b]."""


class StepFailureError(PesinLabError):
    """A graph-transform step failed to solve at some grid node."""

    def __init__(self, message: str, node_index: int):
        super().__init__(f"{message} (grid node {node_index})")
        self.node_index = node_index


class PreconditionError(PesinLabError):
    """A theorem precondition was violated; names the failing inequality."""

    def __init__(self, inequality: str, lhs: float, rhs: float):
        super().__init__(
            f"precondition violated: {inequality} fails with {lhs:.6g} > {rhs:.6g}"
        )
        self.inequality = inequality
        self.lhs = lhs
        self.rhs = rhs


class ChartDomainError(PesinLabError):
    """A stable-manifold chart was requested on a ball too large to solve."""


class TransversalityError(PesinLabError):
    """Leaf/transversal intersection could not be solved."""


class NonUniquenessError(PesinLabError):
    """Multistart found more than one leaf/transversal intersection."""


class ShrinkScheduleError(PesinLabError):
    """A mapped set escaped the target chart; retry with smaller radii."""
