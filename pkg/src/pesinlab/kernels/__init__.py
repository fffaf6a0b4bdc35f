"""Backend selection for the hot loops.

Set PESINLAB_BACKEND=numpy to force the plain-Python/numpy fallback;
PESINLAB_BACKEND=numba demands the compiled path (raises if numba is
missing).  Default: numba when importable, fallback otherwise.

benchmarks/bench_kernels.py compares the two paths on identical inputs.
"""

from __future__ import annotations

import os

from . import _impl

_ENV = "PESINLAB_BACKEND"
_requested = os.environ.get(_ENV, "").strip().lower()

if _requested not in ("", "numba", "numpy"):
    raise RuntimeError(f"{_ENV} must be 'numba' or 'numpy', got {_requested!r}")

if _requested == "numpy":
    BACKEND = "numpy"
else:
    try:
        import numba

        BACKEND = "numba"
    except ImportError:
        if _requested == "numba":
            raise
        BACKEND = "numpy"


def _wrap(func):
    if BACKEND == "numba":
        return numba.njit(cache=True)(func)
    return func


skew_orbit = _wrap(_impl.skew_orbit)
skew_step_jacobians = _wrap(_impl.skew_step_jacobians)
centered_orbit = _wrap(_impl.centered_orbit)
qr_sweep = _wrap(_impl.qr_sweep)
qr_sweep_adjoint_reverse = _wrap(_impl.qr_sweep_adjoint_reverse)
separation_rates = _wrap(_impl.separation_rates)

DIVERGENCE_GUARD = _impl.DIVERGENCE_GUARD

__all__ = [
    "BACKEND",
    "DIVERGENCE_GUARD",
    "skew_orbit",
    "skew_step_jacobians",
    "centered_orbit",
    "qr_sweep",
    "qr_sweep_adjoint_reverse",
    "separation_rates",
]
