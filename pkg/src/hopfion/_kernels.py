"""Compiled loops for the plaquette energy and its gradient.

Each kernel walks the plaquettes of one lattice plane in a fixed order, so
sums are bit-identical between runs.  Arrays are three-dimensional; a 2D
lattice is passed with a trailing axis of length one.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# Below this value of N^2 + D^2 in the triangle formula, two vertices are
# (nearly) antipodal and the area is undefined.
ILL_CONDITIONED_TOL = 1e-14


@njit(cache=True, inline="always")
def _tri(a0, a1, a2, b0, b1, b2, c0, c1, c2, g, ia, ib, ic, coef, want):
    # signed solid angle of (a, b, c); accumulates coef * d(area) into g rows ia, ib, ic
    bc0 = b1 * c2 - b2 * c1
    bc1 = b2 * c0 - b0 * c2
    bc2 = b0 * c1 - b1 * c0
    num = a0 * bc0 + a1 * bc1 + a2 * bc2
    den = 1.0 + a0 * b0 + a1 * b1 + a2 * b2 + b0 * c0 + b1 * c1 + b2 * c2 + c0 * a0 + c1 * a1 + c2 * a2
    r2 = num * num + den * den
    if r2 < ILL_CONDITIONED_TOL:
        return np.nan
    area = 2.0 * np.arctan2(num, den)
    if want:
        s = coef * 2.0 / r2
        sd, sn = s * den, s * num
        # d(area)/da = s (den (b x c) - num (b + c)), cyclic for b and c
        g[ia, 0] += sd * bc0 - sn * (b0 + c0)
        g[ia, 1] += sd * bc1 - sn * (b1 + c1)
        g[ia, 2] += sd * bc2 - sn * (b2 + c2)
        g[ib, 0] += sd * (c1 * a2 - c2 * a1) - sn * (a0 + c0)
        g[ib, 1] += sd * (c2 * a0 - c0 * a2) - sn * (a1 + c1)
        g[ib, 2] += sd * (c0 * a1 - c1 * a0) - sn * (a2 + c2)
        g[ic, 0] += sd * (a1 * b2 - a2 * b1) - sn * (a0 + b0)
        g[ic, 1] += sd * (a2 * b0 - a0 * b2) - sn * (a1 + b1)
        g[ic, 2] += sd * (a0 * b1 - a1 * b0) - sn * (a2 + b2)
    return area


@njit(cache=True)
def plane_energy(ext, grad, a, b, cap0, off, weight, want):
    """Sum of w * area^2 over the (a, b) plaquettes; adds d/d(ext) into ``grad``.

    ``ext`` and ``grad`` are flattened to (sites, 3) with the lattice shape
    ``ext.shape[:3]``.  ``cap0`` selects the boundary-closing plaquettes of a
    capped axis 0 (a == 0 there, rows of the extended array); otherwise
    plaquettes start on rows ``off .. off + rows`` and are periodic in a and b.
    ``weight`` holds one weight per plaquette row (or a single value).
    Returns NaN if any triangle is ill-conditioned.
    """
    n0, n1, n2 = ext.shape[0], ext.shape[1], ext.shape[2]
    flat = ext.reshape(n0 * n1 * n2, 3)
    nw = weight.shape[0]
    if cap0:
        rows, start = n0 - 1, 0
    else:
        rows, start = n0 - 2 * off, off
    total = 0.0
    dims = (n0, n1, n2)
    for i in range(rows):
        w = weight[min(i, nw - 1)]
        for j in range(n1):
            for k in range(n2):
                x = (i + start, j, k)
                # corner indices
                p1 = (x[0] * n1 + x[1]) * n2 + x[2]
                if cap0:
                    xa = (x[0] + 1, x[1], x[2])
                else:
                    xa = _step(x, a, dims, off)
                xb = _step(x, b, dims, off)
                xab = _step(xa, b, dims, off)
                p2 = (xa[0] * n1 + xa[1]) * n2 + xa[2]
                p3 = (xab[0] * n1 + xab[1]) * n2 + xab[2]
                p4 = (xb[0] * n1 + xb[1]) * n2 + xb[2]
                v1, v2, v3, v4 = flat[p1], flat[p2], flat[p3], flat[p4]
                t1 = _tri(v1[0], v1[1], v1[2], v2[0], v2[1], v2[2], v3[0], v3[1], v3[2], grad, p1, p2, p3, 0.0, False)
                t2 = _tri(v1[0], v1[1], v1[2], v3[0], v3[1], v3[2], v4[0], v4[1], v4[2], grad, p1, p3, p4, 0.0, False)
                area = t1 + t2
                if np.isnan(area):
                    return np.nan
                total += w * area * area
                if want:
                    coef = 2.0 * w * area
                    _tri(v1[0], v1[1], v1[2], v2[0], v2[1], v2[2], v3[0], v3[1], v3[2], grad, p1, p2, p3, coef, True)
                    _tri(v1[0], v1[1], v1[2], v3[0], v3[1], v3[2], v4[0], v4[1], v4[2], grad, p1, p3, p4, coef, True)
    return total


@njit(cache=True, inline="always")
def _step(x, axis, dims, off):
    # neighbour along axis: periodic, except axis 0 of a capped lattice (off = 1)
    if axis == 0:
        if off == 1:
            return (x[0] + 1, x[1], x[2])
        return ((x[0] + 1) % dims[0], x[1], x[2])
    if axis == 1:
        return (x[0], (x[1] + 1) % dims[1], x[2])
    return (x[0], x[1], (x[2] + 1) % dims[2])
