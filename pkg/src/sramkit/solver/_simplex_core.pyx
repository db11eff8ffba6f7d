# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled simplex kernels; API mirrors _kernels_py exactly."""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "compiled"

DEF AT_LO = 0
DEF AT_HI = 1
DEF FREE = 2


def price_dantzig(double[:] d, signed char[:] vstat, cnp.uint8_t[:] movable, double tol):
    cdef Py_ssize_t n = d.shape[0]
    cdef Py_ssize_t j, best = -1
    cdef double v, bestv = 0.0
    cdef signed char s
    for j in range(n):
        if not movable[j]:
            continue
        s = vstat[j]
        if s == AT_LO:
            v = -d[j]
        elif s == AT_HI:
            v = d[j]
        elif s == FREE:
            v = d[j] if d[j] > 0 else -d[j]
        else:
            continue
        if v > tol and v > bestv:
            bestv = v
            best = j
    return best


def price_bland(double[:] d, signed char[:] vstat, cnp.uint8_t[:] movable, double tol):
    cdef Py_ssize_t n = d.shape[0]
    cdef Py_ssize_t j
    cdef signed char s
    for j in range(n):
        if not movable[j]:
            continue
        s = vstat[j]
        if s == AT_LO and d[j] < -tol:
            return j
        if s == AT_HI and d[j] > tol:
            return j
        if s == FREE and (d[j] > tol or d[j] < -tol):
            return j
    return -1


def ratio_test(double[:] col, double direction, long[:] basis,
               double[:] xval, double[:] lo, double[:] hi,
               double flip_gap, double piv_tol, bint bland):
    cdef Py_ssize_t m = col.shape[0]
    cdef Py_ssize_t i, b
    cdef double alpha, room, t
    cdef double tmin = np.inf
    for i in range(m):
        alpha = col[i] * direction
        b = basis[i]
        if alpha > piv_tol:
            room = xval[b] - lo[b]
            if room < 0:
                room = 0
            t = room / alpha
            if t < tmin:
                tmin = t
        elif alpha < -piv_tol:
            room = hi[b] - xval[b]
            if room < 0:
                room = 0
            t = room / (-alpha)
            if t < tmin:
                tmin = t
    if flip_gap <= tmin:
        if flip_gap == np.inf:
            return np.inf, -1, 2
        return flip_gap, -1, 1
    if tmin == np.inf:
        return np.inf, -1, 2
    cdef double cutoff = tmin * (1 + 1e-12) + 1e-300
    cdef Py_ssize_t best = -1
    cdef double bestscore = -1.0
    cdef long bestbvar = 0
    cdef double score
    for i in range(m):
        alpha = col[i] * direction
        b = basis[i]
        if alpha > piv_tol:
            room = xval[b] - lo[b]
            if room < 0:
                room = 0
            t = room / alpha
        elif alpha < -piv_tol:
            room = hi[b] - xval[b]
            if room < 0:
                room = 0
            t = room / (-alpha)
        else:
            continue
        if t <= cutoff:
            if bland:
                if best < 0 or basis[i] < bestbvar:
                    best = i
                    bestbvar = basis[i]
            else:
                score = alpha if alpha > 0 else -alpha
                if score > bestscore:
                    bestscore = score
                    best = i
    return tmin, best, 0


def pivot_update(double[:, :] T, Py_ssize_t r, Py_ssize_t j):
    cdef Py_ssize_t nrows = T.shape[0]
    cdef Py_ssize_t ncols = T.shape[1]
    cdef Py_ssize_t i, k
    cdef double piv = T[r, j]
    cdef double f
    for k in range(ncols):
        T[r, k] /= piv
    for i in range(nrows):
        if i == r:
            continue
        f = T[i, j]
        if f > 1e-14 or f < -1e-14:
            for k in range(ncols):
                T[i, k] -= f * T[r, k]
    for i in range(nrows):
        T[i, j] = 0.0
    T[r, j] = 1.0


def dual_pick_row(long[:] basis, double[:] xval, double[:] lo, double[:] hi, double tol):
    cdef Py_ssize_t m = basis.shape[0]
    cdef Py_ssize_t i, best = -1
    cdef double v, bestv = tol
    cdef Py_ssize_t b
    for i in range(m):
        b = basis[i]
        v = lo[b] - xval[b]
        if xval[b] - hi[b] > v:
            v = xval[b] - hi[b]
        if v > bestv:
            bestv = v
            best = i
    return best


def dual_ratio(double[:] row, double[:] d, signed char[:] vstat,
               cnp.uint8_t[:] movable, int want, double piv_tol):
    cdef Py_ssize_t n = row.shape[0]
    cdef Py_ssize_t j, best = -1
    cdef double wa, theta, ad, ar
    cdef double besttheta = np.inf
    cdef double bestalpha = 0.0
    cdef signed char s
    for j in range(n):
        if not movable[j]:
            continue
        s = vstat[j]
        if s == 3:
            continue
        wa = want * row[j]
        if s == AT_LO:
            if wa >= -piv_tol:
                continue
        elif s == AT_HI:
            if wa <= piv_tol:
                continue
        else:
            if -piv_tol <= wa <= piv_tol:
                continue
        ad = d[j] if d[j] > 0 else -d[j]
        ar = row[j] if row[j] > 0 else -row[j]
        theta = ad / ar
        if theta < besttheta * (1 - 1e-12) - 1e-300:
            besttheta = theta
            bestalpha = ar
            best = j
        elif theta <= besttheta * (1 + 1e-12) + 1e-300 and ar > bestalpha:
            besttheta = theta if theta < besttheta else besttheta
            bestalpha = ar
            best = j
    return best
