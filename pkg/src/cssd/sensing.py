"""Random sensing operators, compression, and empirical RIP checks.

Gaussian factors have i.i.d. N(0, 1/p) entries, where p is that factor's
row count. An operator is fully described by its form, its dimensions and
its seed; matrices are regenerated from the seed and never serialized.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

from .errors import InputError
from .rng import Stream
from .tensor import as_matrix, as_vector

__all__ = [
    "SensingOperator",
    "Measurement",
    "gaussian_operator",
    "kron_operator",
    "identity_operator",
    "compress",
    "empirical_ric",
    "ms_signal_sampler",
    "operator_from_json",
]


def _gaussian(p: int, n: int, seed: int) -> np.ndarray:
    return Stream(seed).normal((p, n), scale=1.0 / np.sqrt(p))


@dataclass(frozen=True, eq=False)
class SensingOperator:
    """A single p×n matrix (``form="single"``) or a per-mode pair (``"kron2"``).

    For ``kron2`` the operator maps an n1×n2 image ``Y`` to ``A1 @ Y @ A2.T``;
    ``dims`` is ``((p1, n1), (p2, n2))``. ``identity=True`` marks the
    uncompressed baseline (all factors are identity matrices).
    """

    form: str
    dims: tuple
    seed: int | None
    matrices: tuple = field(repr=False)
    identity: bool = False

    @property
    def ratio(self) -> float:
        return float(np.prod([p / n for p, n in self.dims]))

    @property
    def input_shape(self) -> tuple:
        if self.form == "single":
            return (self.dims[0][1],)
        return (self.dims[0][1], self.dims[1][1])

    @property
    def output_shape(self) -> tuple:
        if self.form == "single":
            return (self.dims[0][0],)
        return (self.dims[0][0], self.dims[1][0])

    @property
    def A(self) -> np.ndarray:
        if self.form != "single":
            raise AttributeError("kron2 operators have factors A1, A2")
        return self.matrices[0]

    def apply(self, signal) -> np.ndarray:
        if self.form == "single":
            y = as_vector(signal, "signal")
            if y.shape != self.input_shape:
                raise InputError(f"signal has length {y.size}, operator expects {self.input_shape[0]}")
            return self.matrices[0] @ y
        Y = as_matrix(signal, "image")
        if Y.shape != self.input_shape:
            raise InputError(f"image has shape {Y.shape}, operator expects {self.input_shape}")
        A1, A2 = self.matrices
        return A1 @ Y @ A2.T

    def to_json(self) -> dict:
        d = {"form": self.form, "dims": [list(pn) for pn in self.dims], "seed": self.seed}
        if self.identity:
            d["identity"] = True
        return d


def operator_from_json(d: dict) -> SensingOperator:
    """Regenerate an operator from its ``(form, dims, seed)`` stanza."""
    extra = set(d) - {"form", "dims", "seed", "identity"}
    if extra:
        raise InputError(f"unknown operator keys: {sorted(extra)}")
    form = d.get("form")
    dims = [tuple(int(v) for v in pn) for pn in d.get("dims", [])]
    if d.get("identity"):
        return identity_operator(*[n for _, n in dims])
    if d.get("seed") is None:
        raise InputError("operator stanza needs a seed")
    if form == "single" and len(dims) == 1:
        (p, n), = dims
        return gaussian_operator(p, n, int(d["seed"]))
    if form == "kron2" and len(dims) == 2:
        (p1, n1), (p2, n2) = dims
        return kron_operator(p1, n1, p2, n2, int(d["seed"]))
    raise InputError(f"bad operator stanza: form={form!r} dims={dims}")


def _check_pn(p, n):
    if p < 1 or n < 1:
        raise InputError("operator dimensions must be >= 1")
    if p > n:
        warnings.warn(f"p={p} > n={n}: operator is not compressive", stacklevel=3)


def gaussian_operator(p: int, n: int, seed: int) -> SensingOperator:
    """p×n operator with i.i.d. N(0, 1/p) entries drawn from ``seed``."""
    p, n = int(p), int(n)
    _check_pn(p, n)
    A = _gaussian(p, n, seed)
    A.setflags(write=False)
    return SensingOperator("single", ((p, n),), int(seed), (A,))


def kron_operator(p1: int, n1: int, p2: int, n2: int, seed: int) -> SensingOperator:
    """Per-mode Gaussian pair; factor 1 uses ``seed``, factor 2 ``seed + 1``."""
    p1, n1, p2, n2 = int(p1), int(n1), int(p2), int(n2)
    _check_pn(p1, n1)
    _check_pn(p2, n2)
    A1 = _gaussian(p1, n1, seed)
    A2 = _gaussian(p2, n2, int(seed) + 1)
    for a in (A1, A2):
        a.setflags(write=False)
    return SensingOperator("kron2", ((p1, n1), (p2, n2)), int(seed), (A1, A2))


def identity_operator(n1: int, n2: int | None = None) -> SensingOperator:
    """Uncompressed baseline: ``I_n`` (1-D) or the pair ``(I_n1, I_n2)``."""
    if n2 is None:
        n1 = int(n1)
        return SensingOperator("single", ((n1, n1),), None, (np.eye(n1),), identity=True)
    n1, n2 = int(n1), int(n2)
    return SensingOperator("kron2", ((n1, n1), (n2, n2)), None, (np.eye(n1), np.eye(n2)), identity=True)


@dataclass(frozen=True, eq=False)
class Measurement:
    """Compressed data plus where it came from."""

    data: np.ndarray
    operator_seed: int | None
    ratio: float


def compress(op: SensingOperator, signal) -> Measurement:
    """``y' = A y`` (single) or ``Y' = A1 Y A2.T`` (kron2). Adds no noise."""
    return Measurement(data=op.apply(signal), operator_seed=op.seed, ratio=op.ratio)


def empirical_ric(op: SensingOperator, signal_sampler: Callable[[], np.ndarray] | Iterator, trials: int) -> float:
    """Largest observed ``| ||A y|| - 1 |`` over unit-norm sampled signals.

    This is a lower bound on the restricted isometry constant in the
    (unsquared) norm form.
    """
    if int(trials) < 1:
        raise InputError("trials must be >= 1")
    draw = signal_sampler if callable(signal_sampler) else lambda: next(signal_sampler)
    worst = 0.0
    for _ in range(int(trials)):
        y = np.asarray(draw(), dtype=float)
        norm = np.linalg.norm(y)
        if norm == 0.0:
            raise InputError("sampler produced a zero signal")
        if abs(norm - 1.0) > 1e-8:
            raise InputError(f"sampler must yield unit-norm signals (got norm {norm:.6g})")
        worst = max(worst, abs(float(np.linalg.norm(op.apply(y))) - 1.0))
    return worst


def ms_signal_sampler(B, Ba, s: int, seed: int) -> Iterator[np.ndarray]:
    """Endless stream of unit-norm smooth-plus-sparse signals ``B θ + B_a θ_a``.

    ``θ`` is standard normal, ``θ_a`` has ``s`` standard-normal entries on a
    uniformly drawn support.
    """
    B = np.asarray(getattr(B, "matrix", B), dtype=float)
    Ba = np.asarray(getattr(Ba, "matrix", Ba), dtype=float)
    stream = Stream(seed)
    q = Ba.shape[1]
    while True:
        theta_a = np.zeros(q)
        theta_a[stream.choice(q, s)] = stream.normal(s)
        y = B @ stream.normal(B.shape[1]) + Ba @ theta_a
        norm = np.linalg.norm(y)
        if norm > 0.0:
            yield y / norm
