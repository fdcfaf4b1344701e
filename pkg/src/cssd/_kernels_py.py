"""Pure-numpy fallback for the compiled kernels in ``_kernels.pyx``."""

import numpy as np


def soft_threshold(x, t, out):
    np.copyto(out, np.sign(x) * np.maximum(np.abs(x) - t, 0.0))


def prox_l1_step(z, g, step, thresh, out):
    """out = soft(z - step*g, thresh); returns ||out||_1."""
    v = z - step * g
    np.copyto(out, np.sign(v) * np.maximum(np.abs(v) - thresh, 0.0))
    return float(np.abs(out).sum())


def extrapolate(xn, x, beta, out):
    np.copyto(out, xn + beta * (xn - x))


def bspline_design(t, kv, degree):
    t = np.asarray(t, dtype=float)
    kv = np.asarray(kv, dtype=float)
    nbasis = kv.size - degree - 1
    n = t.size
    span = np.searchsorted(kv, t, side="right") - 1
    span = np.clip(span, degree, nbasis - 1)
    N = np.zeros((n, degree + 1))
    N[:, 0] = 1.0
    left = np.zeros((n, degree + 1))
    right = np.zeros((n, degree + 1))
    for j in range(1, degree + 1):
        left[:, j] = t - kv[span + 1 - j]
        right[:, j] = kv[span + j] - t
        saved = np.zeros(n)
        for r in range(j):
            temp = N[:, r] / (right[:, r + 1] + left[:, j - r])
            N[:, r] = saved + right[:, r + 1] * temp
            saved = left[:, j - r] * temp
        N[:, j] = saved
    out = np.zeros((n, nbasis))
    rows = np.arange(n)
    for j in range(degree + 1):
        out[rows, span - degree + j] = N[:, j]
    return out


def column_support(B, tol):
    """First and last row index with |B| > tol per column (-1 if none)."""
    nz = np.abs(np.asarray(B)) > tol
    any_nz = nz.any(axis=0)
    n = nz.shape[0]
    first = np.where(any_nz, nz.argmax(axis=0), -1).astype(np.int64)
    last = np.where(any_nz, n - 1 - nz[::-1].argmax(axis=0), -1).astype(np.int64)
    return first, last
