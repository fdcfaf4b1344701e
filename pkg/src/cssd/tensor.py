"""Dense linear-algebra substrate: validation, reduced SVD, Kronecker and
mode-n products, vectorization.

Matrices and tensors are plain C-ordered ``numpy.ndarray`` objects. The
vectorization convention stacks columns, so that
``vec(A @ X @ C.T) == kronecker(C, A) @ vec(X)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, SizeError

__all__ = [
    "SvdResult",
    "as_matrix",
    "as_vector",
    "svd_reduced",
    "mode_product",
    "kronecker",
    "spectral_norm",
    "vec",
    "unvec",
    "RANK_RTOL",
    "KRON_MAX_ENTRIES",
]

RANK_RTOL = 1e-12
KRON_MAX_ENTRIES = 10**8


def _finite(a, what):
    if not np.all(np.isfinite(a)):
        raise InputError(f"{what} has non-finite entries")
    return a


def as_matrix(M, what="matrix") -> np.ndarray:
    """Return ``M`` as a finite 2-D float array, raising :class:`InputError` otherwise."""
    a = np.asarray(M, dtype=float)
    if a.ndim != 2:
        raise InputError(f"{what} must be 2-D, got shape {a.shape}")
    return _finite(a, what)


def as_vector(v, what="vector") -> np.ndarray:
    a = np.asarray(v, dtype=float)
    if a.ndim != 1:
        raise InputError(f"{what} must be 1-D, got shape {a.shape}")
    return _finite(a, what)


@dataclass(frozen=True)
class SvdResult:
    """Reduced SVD ``M = U @ diag(s) @ V.T`` truncated to numerical rank.

    ``U`` is n×r and ``V`` is c×r, both with orthonormal columns; ``s`` is
    nonincreasing. Column signs are fixed so that the largest-magnitude
    entry of every column of ``U`` is positive.
    """

    U: np.ndarray
    s: np.ndarray
    V: np.ndarray

    @property
    def rank(self) -> int:
        return self.s.size


def svd_reduced(M, rtol: float = RANK_RTOL) -> SvdResult:
    """Reduced SVD keeping singular values ``>= rtol * s_max``."""
    a = as_matrix(M)
    U, s, Vt = np.linalg.svd(a, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        r = 0
    else:
        r = int(np.count_nonzero(s >= rtol * s[0]))
    U, s, V = U[:, :r], s[:r], Vt[:r].T
    if r:
        pivot = np.abs(U).argmax(axis=0)
        signs = np.sign(U[pivot, np.arange(r)])
        signs[signs == 0] = 1.0
        U = U * signs
        V = V * signs
    return SvdResult(U=np.ascontiguousarray(U), s=s, V=np.ascontiguousarray(V))


def spectral_norm(M) -> float:
    """Largest singular value of ``M`` (0 for an empty or zero matrix)."""
    a = as_matrix(M)
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))


def kronecker(A, B, max_entries: int = KRON_MAX_ENTRIES) -> np.ndarray:
    """Kronecker product with block ``(i, j)`` equal to ``A[i, j] * B``."""
    a, b = as_matrix(A, "A"), as_matrix(B, "B")
    rows, cols = a.shape[0] * b.shape[0], a.shape[1] * b.shape[1]
    if rows * cols > max_entries:
        raise SizeError(
            f"Kronecker product would be {rows}x{cols} ({rows * cols} entries), "
            f"cap is {max_entries}"
        )
    return np.kron(a, b)


def mode_product(T, M, mode: int) -> np.ndarray:
    """Mode-``mode`` product ``T ×_mode M`` (modes are 0-based).

    The output has extent ``M.shape[0]`` along ``mode`` and matches ``T``
    elsewhere. For a matrix ``X``, ``mode_product(mode_product(X, A, 0), C, 1)``
    equals ``A @ X @ C.T``.
    """
    t = _finite(np.asarray(T, dtype=float), "tensor")
    m = as_matrix(M)
    if not 0 <= mode < t.ndim:
        raise InputError(f"mode {mode} out of range for a {t.ndim}-way tensor")
    if m.shape[1] != t.shape[mode]:
        raise InputError(
            f"matrix has {m.shape[1]} columns but tensor extent along mode {mode} is {t.shape[mode]}"
        )
    out = np.tensordot(m, t, axes=([1], [mode]))
    return np.ascontiguousarray(np.moveaxis(out, 0, mode))


def vec(X) -> np.ndarray:
    """Column-stacking vectorization (first index fastest)."""
    return np.asarray(X).reshape(-1, order="F")


def unvec(v, shape) -> np.ndarray:
    """Inverse of :func:`vec`."""
    return np.ascontiguousarray(np.asarray(v).reshape(shape, order="F"))
