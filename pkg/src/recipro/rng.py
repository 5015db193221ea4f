"""Seeded randomness for the whole toolchain.

Every random decision (class subsampling, recipient shuffles, batch order)
flows through SplitMix64, a tiny 64-bit generator that is trivial to
re-implement bit-for-bit in any language.  Reference: Steele, Lea & Flood,
"Fast splittable pseudorandom number generators" (the mixer used by
java.util.SplittableRandom).
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


class SplitMix64:
    """64-bit SplitMix generator with rejection-sampled bounded draws."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def randbelow(self, n: int) -> int:
        """Uniform draw from [0, n) without modulo bias (rejection sampling)."""
        if n <= 0:
            raise ValueError("randbelow requires n >= 1")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            v = self.next_u64()
            if v < limit:
                return v % n

    def shuffle(self, seq: list) -> None:
        """In-place Fisher-Yates shuffle, iterating from the tail down."""
        for i in range(len(seq) - 1, 0, -1):
            j = self.randbelow(i + 1)
            seq[i], seq[j] = seq[j], seq[i]


def derive_seed(seed: int, tag: str) -> int:
    """Stable sub-stream seed: FNV-1a of the tag folded into the base seed.

    Keeps independent pipeline stages (balance, split, per-epoch batch order)
    on decorrelated streams while staying reproducible from one run seed.
    """
    h = 0xCBF29CE484222325
    for byte in tag.encode("utf-8"):
        h = ((h ^ byte) * 0x100000001B3) & _MASK64
    return SplitMix64(seed ^ h).next_u64()
