"""Portable seeded randomness.

All randomized behavior in the toolkit (random splits, worksheet sampling,
the Random heuristic, synthetic corpora) flows through :class:`SplitMix64`,
a named 64-bit generator whose full state is one integer. Together with the
explicit Fisher-Yates shuffle below, any split or sample is reproducible
from (algorithm name, seed) alone, independent of platform, Python version,
or library versions.

splitmix64 reference sequence from seed 1234567:
6457827717110365317, 3203168211198807973, 9817491932198370423, ...
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1


def _fnv1a64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for b in data:
        h = ((h ^ b) * 0x100000001B3) & MASK64
    return h


class SplitMix64:
    """splitmix64 stream with unbiased bounded draws and a documented shuffle."""

    def __init__(self, seed: int):
        self._state = seed & MASK64

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def randbelow(self, n: int) -> int:
        """Uniform integer in [0, n) by masked rejection; no modulo bias."""
        if n <= 0:
            raise ValueError("randbelow needs n >= 1")
        mask = (1 << (n - 1).bit_length()) - 1
        while True:
            v = self.next_u64() & mask
            if v < n:
                return v

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates: for i = n-1 .. 1, swap i with randbelow(i+1)."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]

    def sample(self, items: list, k: int) -> list:
        """First k elements of a Fisher-Yates shuffle of a copy of items."""
        pool = list(items)
        self.shuffle(pool)
        return pool[:k]

    def choice(self, items: list):
        if not items:
            raise IndexError("choice on empty sequence")
        return items[self.randbelow(len(items))]

    def derive(self, *tokens: str) -> "SplitMix64":
        """Child stream keyed by string tokens; order-independent of call site.

        Used where per-item determinism must not depend on iteration order,
        e.g. the Random heuristic seeds a child per query_id.
        """
        h = self._state
        for t in tokens:
            h ^= _fnv1a64(t.encode("utf-8"))
            h = (h * 0x9E3779B97F4A7C15) & MASK64
        return SplitMix64(h)
