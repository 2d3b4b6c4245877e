"""SplitMix64 streams.

Every random decision in the package (matrix columns, keys derived from
seeds, channel losses, issuer choice) goes through this generator so that
results depend only on integer seeds, never on the platform or on the
numpy/CPython version.

Output ``i`` (0-based) of the stream seeded with ``s`` is
``mix64(s + (i + 1) * GAMMA) mod 2**64``; the generator is therefore
counter-based and the vectorised :func:`stream_u64` agrees bit-for-bit with
the scalar :class:`SplitMix64`.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_INV_2_53 = 1.0 / (1 << 53)


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def derive_seed(*parts: int) -> int:
    """Fold integers into a single 64-bit seed (order-sensitive)."""
    acc = 0x6A09E667F3BCC908
    for part in parts:
        acc = mix64((acc ^ (part & MASK64)) + GAMMA)
    return acc


class SplitMix64:
    __slots__ = ("state",)

    def __init__(self, seed: int) -> None:
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GAMMA) & MASK64
        return mix64(self.state)

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 bits of resolution."""
        return (self.next_u64() >> 11) * _INV_2_53

    def randbelow(self, n: int) -> int:
        """Unbiased integer in [0, n) by rejection."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n

    def randbytes(self, count: int) -> bytes:
        words = (count + 7) // 8
        raw = b"".join(self.next_u64().to_bytes(8, "big") for _ in range(words))
        return raw[:count]


_NP_GAMMA = np.uint64(GAMMA)
_NP_M1 = np.uint64(_M1)
_NP_M2 = np.uint64(_M2)


def stream_u64(seed: int, start: int, count: int) -> np.ndarray:
    """Outputs ``start .. start+count-1`` of the stream seeded with ``seed``."""
    counters = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    z = np.uint64(seed & MASK64) + counters * _NP_GAMMA
    z = (z ^ (z >> np.uint64(30))) * _NP_M1
    z = (z ^ (z >> np.uint64(27))) * _NP_M2
    return z ^ (z >> np.uint64(31))


def stream_uniform(seed: int, start: int, count: int) -> np.ndarray:
    return (stream_u64(seed, start, count) >> np.uint64(11)).astype(np.float64) * _INV_2_53
