"""Smooth and sparse-side basis matrices and their diagnostics.

B-spline bases use a clamped (open) uniform knot vector on [0, 1] with
``knots`` equally spaced interior knots, sampled at the cell midpoints
``t_i = (i - 0.5) / n``. A degree-``d`` basis then has ``knots + d + 1``
columns, rows sum to one, and every column is supported on a contiguous
run of rows.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import InputError
from .tensor import as_matrix, svd_reduced

__all__ = [
    "BasisSpec",
    "BasisMatrix",
    "build_bspline_basis",
    "build_identity_basis",
    "build_basis",
    "local_support_length",
    "incoherence",
    "ric_upper_bound",
    "NONZERO_TOL",
]

NONZERO_TOL = 1e-12


@dataclass(frozen=True)
class BasisSpec:
    """What basis to build: ``kind`` is ``"bspline"`` or ``"identity"``."""

    kind: str
    n: int
    degree: int = 0
    knots: int = 0

    def __post_init__(self):
        if self.kind not in ("bspline", "identity"):
            raise InputError(f"unknown basis kind {self.kind!r}")
        if int(self.n) < 1:
            raise InputError("basis length n must be >= 1")
        if self.kind == "bspline" and (int(self.degree) < 0 or int(self.knots) < 0):
            raise InputError("degree and knots must be >= 0")

    @property
    def columns(self) -> int:
        if self.kind == "identity":
            return self.n
        return self.knots + self.degree + 1

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "n": self.n}
        if self.kind == "bspline":
            d.update(degree=self.degree, knots=self.knots)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "BasisSpec":
        allowed = {"kind", "n", "degree", "knots"}
        extra = set(d) - allowed
        if extra:
            raise InputError(f"unknown basis keys: {sorted(extra)}")
        return cls(
            kind=d["kind"], n=int(d["n"]), degree=int(d.get("degree", 0)), knots=int(d.get("knots", 0))
        )


@dataclass(frozen=True, eq=False)
class BasisMatrix:
    """An immutable basis with cached diagnostics."""

    spec: BasisSpec
    matrix: np.ndarray = field(repr=False)
    mu: float
    support_len: int
    sigma_max: float
    sigma_min: float

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def ric_bound(self) -> float:
        return max(self.sigma_max - 1.0, 1.0 - self.sigma_min)


def _clamped_knots(degree: int, knots: int) -> np.ndarray:
    inner = np.linspace(0.0, 1.0, knots + 2)
    return np.concatenate([np.zeros(degree), inner, np.ones(degree)])


def _finish(spec: BasisSpec, M: np.ndarray) -> BasisMatrix:
    s = np.linalg.svd(M, compute_uv=False)
    sigma_min = float(s[-1]) if M.shape[1] <= M.shape[0] else 0.0
    M.setflags(write=False)
    return BasisMatrix(
        spec=spec,
        matrix=M,
        mu=incoherence(M),
        support_len=local_support_length(M),
        sigma_max=float(s[0]),
        sigma_min=sigma_min,
    )


def build_bspline_basis(spec: BasisSpec) -> BasisMatrix:
    """Sample the clamped uniform B-spline basis described by ``spec``."""
    if spec.kind != "bspline":
        raise InputError("build_bspline_basis needs a bspline spec")
    r = spec.columns
    if r > spec.n:
        raise InputError(f"basis has {r} columns but only n={spec.n} samples")
    t = (np.arange(spec.n) + 0.5) / spec.n
    M = kernels.bspline_design(t, _clamped_knots(spec.degree, spec.knots), spec.degree)
    if np.any(np.abs(M).max(axis=0) <= NONZERO_TOL):
        raise InputError("a basis column has no sample inside its support; use fewer knots")
    return _finish(spec, M)


def build_identity_basis(n: int) -> BasisMatrix:
    if int(n) < 1:
        raise InputError("n must be >= 1")
    M = np.eye(int(n))
    M.setflags(write=False)
    # diagnostics are known in closed form; skips an n x n SVD
    return BasisMatrix(
        spec=BasisSpec("identity", int(n)), matrix=M, mu=1.0, support_len=1, sigma_max=1.0, sigma_min=1.0
    )


@functools.lru_cache(maxsize=64)
def build_basis(spec: BasisSpec) -> BasisMatrix:
    """Build (and cache) the basis for any supported spec."""
    if spec.kind == "identity":
        return build_identity_basis(spec.n)
    return build_bspline_basis(spec)


def local_support_length(B) -> int:
    """Longest row interval covering the nonzeros of any column.

    Entries with magnitude above ``NONZERO_TOL`` count as nonzero; interior
    zeros inside the interval are included.
    """
    a = as_matrix(B)
    first, last = kernels.column_support(a, NONZERO_TOL)
    if np.any(first < 0):
        raise InputError(f"column {int(np.argmax(first < 0))} is all zero")
    return int((last - first).max() + 1)


def incoherence(B) -> float:
    """Incoherence ``mu(B) = (n / r) * max_i ||U.T e_i||^2`` over all n rows.

    ``U`` is the left factor of the reduced SVD, so the value depends only
    on the column space of ``B``.
    """
    a = as_matrix(B)
    svd = svd_reduced(a)
    if svd.rank == 0:
        raise InputError("incoherence of a zero matrix is undefined")
    leverage = np.einsum("ij,ij->i", svd.U, svd.U)
    return float(a.shape[0] / svd.rank * leverage.max())


def ric_upper_bound(B) -> float:
    """``max(s_max - 1, 1 - s_min)`` over the singular values of ``B``.

    With more columns than rows the smallest singular value is taken as 0.
    """
    a = as_matrix(B)
    s = np.linalg.svd(a, compute_uv=False)
    s_min = s[-1] if a.shape[1] <= a.shape[0] else 0.0
    return float(max(s[0] - 1.0, 1.0 - s_min))
