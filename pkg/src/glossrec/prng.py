"""Self-contained 64-bit PRNG for corpus generation.

Platform RNGs (and numpy's, across versions) are not a stable contract for
golden corpora, so the generator is spelled out here: xorshift64* with the
multiplier from Vigna, "An experimental exploration of Marsaglia's xorshift
generators" (0x2545F4914F6CDD1D), seeded through one round of splitmix64 so
that seed 0 and small seeds still produce well-mixed states.

All arithmetic is modulo 2**64. Doubles take the top 53 bits, normals come
from the Box-Muller transform, so the stream is reproducible anywhere IEEE
float64 is.
"""

from __future__ import annotations

import math

_MASK64 = (1 << 64) - 1
_XORSHIFT_MULT = 0x2545F4914F6CDD1D
_SPLITMIX_GAMMA = 0x9E3779B97F4A7C15


def splitmix64(state: int) -> tuple[int, int]:
    """One splitmix64 step: returns (new_state, output)."""
    state = (state + _SPLITMIX_GAMMA) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, z ^ (z >> 31)


class Xorshift64Star:
    """xorshift64* stream with convenience draws used by the corpus generator."""

    def __init__(self, seed: int):
        # splitmix guarantees a nonzero xorshift state for every seed
        _, state = splitmix64(seed & _MASK64)
        self.state = state if state != 0 else _XORSHIFT_MULT

    def next_u64(self) -> int:
        x = self.state
        x ^= (x >> 12)
        x ^= (x << 25) & _MASK64
        x ^= (x >> 27)
        self.state = x
        return (x * _XORSHIFT_MULT) & _MASK64

    def uniform(self) -> float:
        """float64 in [0, 1), using the top 53 bits."""
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def randint(self, low: int, high: int) -> int:
        """Uniform integer in the inclusive range [low, high]."""
        if high < low:
            raise ValueError(f"empty range [{low}, {high}]")
        span = high - low + 1
        return low + int(self.uniform() * span)

    def normal(self) -> float:
        """Standard normal via Box-Muller (consumes two uniforms)."""
        u1 = self.uniform()
        u2 = self.uniform()
        # uniform() can return exactly 0.0; log needs a positive argument
        while u1 == 0.0:
            u1 = self.uniform()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randint(0, i)
            items[i], items[j] = items[j], items[i]

    def derive(self, stream_index: int) -> "Xorshift64Star":
        """Independent child stream (for per-split generation)."""
        child = Xorshift64Star.__new__(Xorshift64Star)
        state = self.state
        for _ in range(stream_index + 1):
            state, out = splitmix64(state)
        child.state = out if out != 0 else _XORSHIFT_MULT
        return child
