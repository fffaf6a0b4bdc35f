"""Hot numeric inner loops, written nopython-compatible.

Every function here runs unchanged either as plain Python over numpy
arrays or compiled by numba's @njit; the package selects at import time
(see kernels/__init__.py). Keep this module free of Python objects,
closures and fancy numpy so both paths stay identical.

The parametric step family covering all bundled scenarios is

    (x, y) |-> (p0 * x,  p1 * y + p2 * sin(x))

with one parameter triple per word index.
"""

from __future__ import annotations

import numpy as np

DIVERGENCE_GUARD = 1.0e12


def skew_orbit(params, x0, y0, nsteps):
    """Iterate the parametric family; returns (orbit, last_finite_index).

    orbit has shape (nsteps + 1, 2); rows past a divergence are nan.
    """
    orbit = np.full((nsteps + 1, 2), np.nan)
    x = x0
    y = y0
    orbit[0, 0] = x
    orbit[0, 1] = y
    last = 0
    for j in range(nsteps):
        a = params[j, 0]
        b = params[j, 1]
        c = params[j, 2]
        x1 = a * x
        y1 = b * y + c * np.sin(x)
        if not (np.isfinite(x1) and np.isfinite(y1)):
            return orbit, last
        if abs(x1) > DIVERGENCE_GUARD or abs(y1) > DIVERGENCE_GUARD:
            return orbit, last
        x = x1
        y = y1
        orbit[j + 1, 0] = x
        orbit[j + 1, 1] = y
        last = j + 1
    return orbit, last


def skew_step_jacobians(params, orbit, nsteps):
    """Step Jacobians along an orbit: J_j = Df_j at orbit[j]."""
    jacs = np.empty((nsteps, 2, 2))
    for j in range(nsteps):
        jacs[j, 0, 0] = params[j, 0]
        jacs[j, 0, 1] = 0.0
        jacs[j, 1, 0] = params[j, 2] * np.cos(orbit[j, 0])
        jacs[j, 1, 1] = params[j, 1]
    return jacs


def centered_orbit(params, base_orbit, vx0, vy0, nsteps, guard):
    """Deviation dynamics relative to a precomputed base orbit.

    Uses sin(x+v) - sin(x) = 2 cos(x + v/2) sin(v/2) so that tiny
    deviations keep full relative precision (no cancellation).
    Returns (devs, last_finite_index).
    """
    devs = np.full((nsteps + 1, 2), np.nan)
    vx = vx0
    vy = vy0
    devs[0, 0] = vx
    devs[0, 1] = vy
    last = 0
    for j in range(nsteps):
        a = params[j, 0]
        b = params[j, 1]
        c = params[j, 2]
        x = base_orbit[j, 0]
        vx1 = a * vx
        vy1 = b * vy + c * 2.0 * np.cos(x + 0.5 * vx) * np.sin(0.5 * vx)
        if not (np.isfinite(vx1) and np.isfinite(vy1)):
            return devs, last
        if abs(vx1) > guard or abs(vy1) > guard:
            return devs, last
        vx = vx1
        vy = vy1
        devs[j + 1, 0] = vx
        devs[j + 1, 1] = vy
        last = j + 1
    return devs, last


def qr_sweep(jacs, q0, stride, check_steps):
    """Forward QR-reorthogonalized cocycle sweep.

    Accumulates log |diag R| column-wise; re-orthogonalizes every
    `stride` steps and once more at the end.  check_steps is a sorted
    int64 array of step counts at which running log sums are recorded
    (pass an empty array to skip).  Returns

        (logs, q, check_logs, min_diag)

    where logs[i] = sum of log |r_ii| for initial column i, q is the
    final orthonormal frame and min_diag the smallest |r_ii| seen.
    """
    n = jacs.shape[0]
    d = q0.shape[0]
    q = np.ascontiguousarray(q0.copy())
    logs = np.zeros(d)
    check_logs = np.zeros((check_steps.shape[0], d))
    min_diag = np.inf
    ic = 0
    since = 0
    for j in range(n):
        q = np.ascontiguousarray(jacs[j]) @ q
        since += 1
        at_check = ic < check_steps.shape[0] and check_steps[ic] == j + 1
        if since == stride or j == n - 1 or at_check:
            q, r = np.linalg.qr(q)
            q = np.ascontiguousarray(q)
            for i in range(d):
                rd = r[i, i]
                if rd < 0.0:
                    for m in range(d):
                        q[m, i] = -q[m, i]
                    rd = -rd
                if rd < min_diag:
                    min_diag = rd
                if rd > 0.0:
                    logs[i] += np.log(rd)
                else:
                    logs[i] = -np.inf
            since = 0
        if at_check:
            for i in range(d):
                check_logs[ic, i] = logs[i]
            ic += 1
    return logs, q, check_logs, min_diag


def qr_sweep_adjoint_reverse(jacs, stride):
    """QR sweep over transposed factors in reverse order.

    The columns of the returned frame converge to the right-singular
    directions of the forward product, fastest first; logs accumulate
    the same singular growth rates (descending).  The sweep starts from
    a fixed generic orthonormal frame: axis-aligned seeds can be exactly
    invariant under triangular cocycles and would never rotate onto the
    dominant directions.
    """
    n = jacs.shape[0]
    d = jacs.shape[1]
    seed = np.empty((d, d))
    for i in range(d):
        for j in range(d):
            seed[i, j] = np.sin((i + 1.0) * (j + 1.0)) + (1.0 if i == j else 0.0)
    q, _r0 = np.linalg.qr(seed)
    q = np.ascontiguousarray(q)
    logs = np.zeros(d)
    min_diag = np.inf
    since = 0
    for jj in range(n):
        j = n - 1 - jj
        q = np.ascontiguousarray(jacs[j].T) @ q
        since += 1
        if since == stride or jj == n - 1:
            q, r = np.linalg.qr(q)
            q = np.ascontiguousarray(q)
            for i in range(d):
                rd = r[i, i]
                if rd < 0.0:
                    for m in range(d):
                        q[m, i] = -q[m, i]
                    rd = -rd
                if rd < min_diag:
                    min_diag = rd
                if rd > 0.0:
                    logs[i] += np.log(rd)
                else:
                    logs[i] = -np.inf
            since = 0
    order = np.argsort(-logs)
    logs_sorted = np.empty(d)
    q_sorted = np.empty((d, d))
    for i in range(d):
        logs_sorted[i] = logs[order[i]]
        for m in range(d):
            q_sorted[m, i] = q[m, order[i]]
    return logs_sorted, q_sorted, min_diag


def separation_rates(params, base_orbit, pts, horizon, guard):
    """Running-slope classification of grid points against a base orbit.

    rate[m] = max over the last half of the horizon of
    (1/j) log |f^j y - f^j x|; flags[m] = 1 when the deviation orbit
    left the guard region (divergence), 2 when the separation hit
    exactly zero (rate is then -inf).
    """
    npts = pts.shape[0]
    rates = np.empty(npts)
    flags = np.zeros(npts, dtype=np.int64)
    half = horizon // 2
    if half < 1:
        half = 1
    for m in range(npts):
        vx = pts[m, 0] - base_orbit[0, 0]
        vy = pts[m, 1] - base_orbit[0, 1]
        rate = -np.inf
        diverged = False
        hit_zero = False
        for j in range(horizon):
            a = params[j, 0]
            b = params[j, 1]
            c = params[j, 2]
            x = base_orbit[j, 0]
            vx1 = a * vx
            vy1 = b * vy + c * 2.0 * np.cos(x + 0.5 * vx) * np.sin(0.5 * vx)
            if not (np.isfinite(vx1) and np.isfinite(vy1)):
                diverged = True
                break
            if abs(vx1) > guard or abs(vy1) > guard:
                diverged = True
                break
            vx = vx1
            vy = vy1
            sep = np.sqrt(vx * vx + vy * vy)
            if j + 1 >= half:
                if sep == 0.0:
                    hit_zero = True
                else:
                    slope = np.log(sep) / (j + 1)
                    if slope > rate:
                        rate = slope
        if diverged:
            rates[m] = np.inf
            flags[m] = 1
        else:
            rates[m] = rate
            if hit_zero and rate == -np.inf:
                flags[m] = 2
    return rates, flags
