"""Backend selection for the hot kernels.

The compiled module ``cssd._kernels`` is used when it imports; otherwise the
numpy implementation in ``cssd._kernels_py`` is used. Setting the
environment variable ``CSSD_PURE_PYTHON=1`` forces the fallback.

Callers go through the module-level functions below so that :func:`use`
can switch backends at runtime (the benchmark relies on this).
"""

from __future__ import annotations

import contextlib
import os

import numpy as np

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

__all__ = [
    "BACKEND",
    "available_backends",
    "use",
    "soft_threshold",
    "prox_l1_step",
    "extrapolate",
    "bspline_design",
    "column_support",
]

_BACKENDS = {"python": _kernels_py}
if _compiled is not None:
    _BACKENDS["compiled"] = _compiled

if _compiled is not None and os.environ.get("CSSD_PURE_PYTHON", "") in ("", "0"):
    BACKEND = "compiled"
else:
    BACKEND = "python"
_impl = _BACKENDS[BACKEND]


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


@contextlib.contextmanager
def use(name: str):
    """Temporarily route every kernel call to backend ``name``."""
    global _impl, BACKEND
    if name not in _BACKENDS:
        raise KeyError(f"backend {name!r} not available; have {available_backends()}")
    saved = (_impl, BACKEND)
    _impl, BACKEND = _BACKENDS[name], name
    try:
        yield
    finally:
        _impl, BACKEND = saved


def _flat(a):
    # kernels take contiguous 1-D views; reshape(-1) never copies a C-contiguous array
    return a.reshape(-1)


def soft_threshold(x, t, out=None):
    x = np.ascontiguousarray(x, dtype=float)
    if out is None:
        out = np.empty_like(x)
    _impl.soft_threshold(_flat(x), float(t), _flat(out))
    return out


def prox_l1_step(z, g, step, thresh, out):
    """Write ``soft(z - step*g, thresh)`` into ``out``; return its l1 norm."""
    return _impl.prox_l1_step(_flat(z), _flat(g), float(step), float(thresh), _flat(out))


def extrapolate(xn, x, beta, out):
    """Write ``xn + beta*(xn - x)`` into ``out``."""
    _impl.extrapolate(_flat(xn), _flat(x), float(beta), _flat(out))
    return out


def bspline_design(t, kv, degree):
    t = np.ascontiguousarray(t, dtype=float)
    kv = np.ascontiguousarray(kv, dtype=float)
    return _impl.bspline_design(t, kv, int(degree))


def column_support(B, tol):
    return _impl.column_support(np.asarray(B, dtype=float), float(tol))
