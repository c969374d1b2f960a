"""Seedable, splittable random streams.

Every stream is a Philox-4x64 counter generator (10 rounds, the published
Random123 constants) keyed by ``(seed, stream)``.  The raw 64-bit output is
turned into uniforms on the open interval (0, 1) by taking the top 53 bits
and adding half an ulp, and Gaussians are produced by inverse-CDF
(``scipy.special.ndtri``, the Cephes rational approximation).  Both
transforms are elementwise and order-preserving, so a given seed reproduces
the same uniform *and* Gaussian streams on every platform.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_MASK64 = (1 << 64) - 1
_TWO_M53 = 2.0 ** -53


def splitmix64(x: int) -> int:
    """One SplitMix64 finalisation step (used to derive child stream ids)."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


class Rng:
    """Counter-based random stream identified by ``(seed, stream)``.

    ``split(i)`` derives an independent child stream deterministically, so
    N parallel chains can each own a generator split from one master seed.
    """

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed) & _MASK64
        self.stream = int(stream) & _MASK64
        self._bitgen = np.random.Philox(key=np.array([self.seed, self.stream], dtype=np.uint64))

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed}, stream={self.stream})"

    def split(self, index: int) -> "Rng":
        child = splitmix64(self.stream ^ splitmix64(int(index) + 1))
        return Rng(self.seed, child)

    def spawn(self, n: int) -> list["Rng"]:
        return [self.split(i) for i in range(n)]

    def raw(self, size=None) -> np.ndarray:
        return self._bitgen.random_raw(size)

    def uniform(self, size=None):
        """Uniform variates on the open interval (0, 1)."""
        bits = np.asarray(self._bitgen.random_raw(size), dtype=np.uint64) >> np.uint64(11)
        u = (bits.astype(np.float64) + 0.5) * _TWO_M53
        return float(u) if size is None else u

    def normal(self, size=None):
        """Standard normal variates by inverse CDF."""
        z = ndtri(self.uniform(size))
        return float(z) if size is None else z
