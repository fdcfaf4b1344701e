"""Seeded, portable random streams.

Uniform doubles come from numpy's PCG64 bit generator, whose output stream
is fixed for a given seed. Normal variates are produced here with the
Box-Muller transform instead of numpy's ziggurat sampler, so a seed maps to
the same numbers regardless of numpy version.
"""

from __future__ import annotations

import numpy as np

__all__ = ["Stream", "cell_seed"]

_U64 = (1 << 64) - 1


def cell_seed(base_seed: int, *keys: int) -> int:
    """Derive an independent 64-bit seed from ``base_seed`` and integer keys."""
    ss = np.random.SeedSequence(int(base_seed) & _U64, spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, np.uint64)[0])


class Stream:
    """A reproducible random stream for one seed.

    Parameters
    ----------
    seed : int
        Non-negative integer seed (reduced modulo 2**64).
    """

    def __init__(self, seed: int):
        if int(seed) < 0:
            raise ValueError("seed must be non-negative")
        self.seed = int(seed) & _U64
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def uniform(self, size) -> np.ndarray:
        """Uniform doubles in [0, 1)."""
        return self._gen.random(size)

    def normal(self, size, scale: float = 1.0) -> np.ndarray:
        """Normal variates N(0, scale**2) via Box-Muller."""
        shape = (size,) if np.isscalar(size) else tuple(size)
        count = int(np.prod(shape, dtype=np.int64))
        pairs = (count + 1) // 2
        u = self._gen.random(2 * pairs)
        # 1 - u lies in (0, 1], keeping the log finite
        radius = np.sqrt(-2.0 * np.log1p(-u[:pairs]))
        angle = 2.0 * np.pi * u[pairs:]
        z = np.empty(2 * pairs)
        z[0::2] = radius * np.cos(angle)
        z[1::2] = radius * np.sin(angle)
        return scale * z[:count].reshape(shape)

    def choice(self, n: int, k: int) -> np.ndarray:
        """``k`` distinct integers from ``range(n)``, in random order."""
        if not 0 <= k <= n:
            raise ValueError(f"cannot draw {k} distinct values from {n}")
        keys = self._gen.random(n)
        return np.argsort(keys, kind="stable")[:k]

    def integers(self, low: int, high: int, size=None):
        """Integers uniform on ``[low, high)``, built from uniform doubles."""
        u = self.uniform(1 if size is None else size)
        out = np.minimum(low + np.floor(u * (high - low)).astype(np.int64), high - 1)
        return int(out[0]) if size is None else out
