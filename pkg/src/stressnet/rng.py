"""Portable deterministic random number generation.

Every random draw in the package (crack seeding, weight init, shuffling,
validation sampling) goes through SplitMix64, a 64-bit mixing generator with
a one-word state. Using a self-contained generator instead of a library RNG
pins datasets and checkpoints bit-for-bit to their integer seeds, across
platforms and library versions.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(base: int, label: str) -> int:
    """Derive an independent stream seed from a base seed and a text label."""
    # FNV-1a over the label, folded into the base seed.
    h = 0xCBF29CE484222325
    for byte in label.encode("utf-8"):
        h = ((h ^ byte) * 0x100000001B3) & _MASK64
    return _mix((base & _MASK64) ^ h)


class SplitMix64:
    """Deterministic uniform generator; one instance per logical stream."""

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        return _mix(self._state)

    def uniform(self, low: float = 0.0, high: float = 1.0) -> float:
        # 53 mantissa bits -> uniform double in [0, 1).
        u = self.next_u64() >> 11
        return low + (high - low) * (u / 9007199254740992.0)

    def randint(self, n: int) -> int:
        """Uniform integer in [0, n). Modulo bias is negligible for n << 2^64."""
        if n <= 0:
            raise ValueError("randint needs n >= 1")
        return self.next_u64() % n

    def choice(self, seq):
        return seq[self.randint(len(seq))]

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randint(i + 1)
            items[i], items[j] = items[j], items[i]

    def sample(self, items, k: int) -> list:
        """k distinct elements, order given by a partial Fisher-Yates pass."""
        if k > len(items):
            raise ValueError("sample size exceeds population")
        pool = list(items)
        out = []
        for _ in range(k):
            j = self.randint(len(pool))
            out.append(pool.pop(j))
        return out

    def uniform_array(self, shape, low: float, high: float) -> np.ndarray:
        n = int(np.prod(shape)) if shape else 1
        vals = [self.uniform(low, high) for _ in range(n)]
        return np.array(vals, dtype=np.float64).reshape(shape)
