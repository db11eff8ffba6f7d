"""Pure-numpy simplex kernels; same API as the compiled extension.

State encoding shared with the driver: vstat per column is
0 = nonbasic at lower bound, 1 = nonbasic at upper bound,
2 = nonbasic free (sitting at zero), 3 = basic.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"

_AT_LO, _AT_HI, _FREE, _BASIC = 0, 1, 2, 3


def price_dantzig(d, vstat, movable, tol):
    """Most-violating eligible entering column, or -1 when optimal."""
    movable = movable != 0
    viol = np.zeros_like(d)
    lo_mask = (vstat == _AT_LO) & movable & (d < -tol)
    hi_mask = (vstat == _AT_HI) & movable & (d > tol)
    fr_mask = (vstat == _FREE) & movable & (np.abs(d) > tol)
    viol[lo_mask] = -d[lo_mask]
    viol[hi_mask] = d[hi_mask]
    viol[fr_mask] = np.abs(d[fr_mask])
    j = int(np.argmax(viol))
    return j if viol[j] > 0.0 else -1


def price_bland(d, vstat, movable, tol):
    """Smallest-index eligible entering column (anti-cycling), or -1."""
    movable = movable != 0
    eligible = movable & (
        ((vstat == _AT_LO) & (d < -tol))
        | ((vstat == _AT_HI) & (d > tol))
        | ((vstat == _FREE) & (np.abs(d) > tol))
    )
    idx = np.nonzero(eligible)[0]
    return int(idx[0]) if idx.size else -1


def ratio_test(col, direction, basis, xval, lo, hi, flip_gap, piv_tol, bland):
    """Step length for an entering move.

    Returns ``(t, row, kind)`` with kind 0 = pivot at ``row``,
    1 = bound flip of the entering variable, 2 = unbounded.
    """
    alpha = col * direction
    xb = xval[basis]
    blo = lo[basis]
    bhi = hi[basis]
    t = np.full(alpha.shape, np.inf)
    dec = alpha > piv_tol
    if np.any(dec):
        room = xb[dec] - blo[dec]
        t[dec] = np.maximum(room, 0.0) / alpha[dec]
    inc = alpha < -piv_tol
    if np.any(inc):
        room = bhi[inc] - xb[inc]
        t[inc] = np.maximum(room, 0.0) / (-alpha[inc])
    tmin = t.min() if t.size else np.inf
    if flip_gap <= tmin:
        if np.isinf(flip_gap):
            return np.inf, -1, 2
        return flip_gap, -1, 1
    if np.isinf(tmin):
        return np.inf, -1, 2
    rows = np.nonzero(t <= tmin * (1 + 1e-12) + 1e-300)[0]
    if bland:
        r = rows[np.argmin(basis[rows])]
    else:
        r = rows[np.argmax(np.abs(alpha[rows]))]
    return float(tmin), int(r), 0


def pivot_update(T, r, j):
    """Row-reduce the tableau (objective row included) on pivot (r, j)."""
    piv = T[r, j]
    T[r] /= piv
    colv = T[:, j].copy()
    colv[r] = 0.0
    nz = np.nonzero(np.abs(colv) > 1e-14)[0]
    if nz.size:
        T[nz] -= np.outer(colv[nz], T[r])
    T[:, j] = 0.0
    T[r, j] = 1.0


def dual_pick_row(basis, xval, lo, hi, tol):
    """Basic row with the largest bound violation, or -1 when feasible."""
    xb = xval[basis]
    viol = np.maximum(lo[basis] - xb, xb - hi[basis])
    r = int(np.argmax(viol))
    return r if viol[r] > tol else -1


def dual_ratio(row, d, vstat, movable, want, piv_tol):
    """Entering column preserving dual feasibility, or -1 (primal infeasible).

    ``want`` is +1 when the leaving basic value must increase, -1 when it
    must decrease.
    """
    wa = want * row
    movable = movable != 0
    eligible = movable & (
        ((vstat == _AT_LO) & (wa < -piv_tol))
        | ((vstat == _AT_HI) & (wa > piv_tol))
        | ((vstat == _FREE) & (np.abs(wa) > piv_tol))
    )
    idx = np.nonzero(eligible)[0]
    if not idx.size:
        return -1
    theta = np.abs(d[idx]) / np.abs(row[idx])
    best = theta.min()
    cand = idx[theta <= best * (1 + 1e-12) + 1e-300]
    return int(cand[np.argmax(np.abs(row[cand]))])
