"""Counter-based random streams for reproducible parallel Monte Carlo.

Replica i draws from a SplitMix64 sequence keyed by (master_seed, i), so the
numbers a replica consumes are a pure function of (seed, index, draw number).
Estimates are therefore byte-identical for any partitioning of replicas
across workers.  The compiled kernels reimplement exactly this generator in
C (uint64 arithmetic, same finalizer), which keeps both backends bit-exact.

Exponential and normal variates use inverse-CDF sampling only, so results do
not depend on rejection-loop implementation details.
"""

from __future__ import annotations

import math

from scipy.special import ndtri

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_INV53 = 1.0 / 9007199254740992.0  # 2**-53


def mix64(z: int) -> int:
    """SplitMix64 finalizer (Stafford mix13)."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D4BDDBD85B968F) & MASK64
    return z ^ (z >> 31)


def stream_key(seed: int, index: int) -> int:
    """Initial state of stream `index` under a 64-bit master seed."""
    return mix64((mix64((seed + GAMMA) & MASK64) + (index * GAMMA)) & MASK64)


class Stream:
    """Stateful view of the counter-based stream (seed, index)."""

    __slots__ = ("seed", "index", "_state")

    def __init__(self, seed: int, index: int = 0):
        self.seed = seed
        self.index = index
        self._state = stream_key(seed, index)

    def next_u64(self) -> int:
        self._state = (self._state + GAMMA) & MASK64
        return mix64(self._state)

    def uniform(self) -> float:
        """Uniform double in the open interval (0, 1)."""
        return ((self.next_u64() >> 11) + 0.5) * _INV53

    def exponential(self, rate: float) -> float:
        return -math.log(self.uniform()) / rate

    def normal(self) -> float:
        return float(ndtri(self.uniform()))

    def randbyte(self) -> int:
        return self.next_u64() & 0xFF

    def randbit(self) -> int:
        return self.next_u64() & 0x1
