# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels. Must stay numerically identical to _kernels_py."""

import numpy as np

from libc.math cimport fabs


def soft_threshold(const double[::1] x, double t, double[::1] out):
    cdef Py_ssize_t i, n = x.shape[0]
    cdef double v
    for i in range(n):
        v = x[i]
        if v > t:
            out[i] = v - t
        elif v < -t:
            out[i] = v + t
        else:
            out[i] = 0.0


def prox_l1_step(const double[::1] z, const double[::1] g, double step,
                 double thresh, double[::1] out):
    """out = soft(z - step*g, thresh); returns ||out||_1."""
    cdef Py_ssize_t i, n = z.shape[0]
    cdef double v, l1 = 0.0
    for i in range(n):
        v = z[i] - step * g[i]
        if v > thresh:
            v = v - thresh
            l1 += v
        elif v < -thresh:
            v = v + thresh
            l1 -= v
        else:
            v = 0.0
        out[i] = v
    return l1


def extrapolate(const double[::1] xn, const double[::1] x, double beta,
                double[::1] out):
    cdef Py_ssize_t i, n = xn.shape[0]
    for i in range(n):
        out[i] = xn[i] + beta * (xn[i] - x[i])


cdef Py_ssize_t _find_span(const double[::1] kv, Py_ssize_t degree,
                           Py_ssize_t nbasis, double t):
    cdef Py_ssize_t lo, hi, mid
    if t >= kv[nbasis]:
        return nbasis - 1
    if t <= kv[degree]:
        return degree
    lo = degree
    hi = nbasis
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if t < kv[mid]:
            hi = mid
        else:
            lo = mid
    return lo


def bspline_design(const double[::1] t, const double[::1] kv, int degree):
    cdef Py_ssize_t nbasis = kv.shape[0] - degree - 1
    cdef Py_ssize_t n = t.shape[0]
    out_arr = np.zeros((n, nbasis))
    cdef double[:, ::1] out = out_arr
    cdef double[::1] N = np.zeros(degree + 1)
    cdef double[::1] left = np.zeros(degree + 1)
    cdef double[::1] right = np.zeros(degree + 1)
    cdef Py_ssize_t row, span, j, r
    cdef double x, saved, temp
    for row in range(n):
        x = t[row]
        span = _find_span(kv, degree, nbasis, x)
        N[0] = 1.0
        for j in range(1, degree + 1):
            left[j] = x - kv[span + 1 - j]
            right[j] = kv[span + j] - x
            saved = 0.0
            for r in range(j):
                temp = N[r] / (right[r + 1] + left[j - r])
                N[r] = saved + right[r + 1] * temp
                saved = left[j - r] * temp
            N[j] = saved
        for j in range(degree + 1):
            out[row, span - degree + j] = N[j]
    return out_arr


def column_support(const double[:, :] B, double tol):
    """First and last row index with |B| > tol per column (-1 if none)."""
    cdef Py_ssize_t n = B.shape[0], q = B.shape[1], i, j
    first_arr = np.full(q, -1, dtype=np.int64)
    last_arr = np.full(q, -1, dtype=np.int64)
    cdef long long[::1] first = first_arr
    cdef long long[::1] last = last_arr
    for i in range(n):
        for j in range(q):
            if fabs(B[i, j]) > tol:
                if first[j] < 0:
                    first[j] = i
                last[j] = i
    return first_arr, last_arr
