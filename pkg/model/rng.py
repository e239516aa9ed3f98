"""
Parameter-initialization PRNG.

xorshift64* seeded through splitmix64, with Box-Muller for normals. The
generator is written out here so model files stay reproducible
independently of numpy's bit-generator versions.
"""

from __future__ import annotations

import math

import numpy as np

MASK64 = (1 << 64) - 1


def splitmix64(state: int) -> tuple[int, int]:
    """One splitmix64 step: returns (new_state, output)."""
    state = (state + 0x9E3779B97F4A7C15) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, z ^ (z >> 31)


class XorShift64Star:
    """xorshift64* (shifts 12, 25, 27; multiplier 0x2545F4914F6CDD1D)."""

    MULTIPLIER = 0x2545F4914F6CDD1D

    def __init__(self, seed: int):
        _, state = splitmix64(seed & MASK64)
        # xorshift must never sit at zero
        self._state = state or 0x9E3779B97F4A7C15
        self._spare: float | None = None

    def next_u64(self) -> int:
        x = self._state
        x ^= x >> 12
        x ^= (x << 25) & MASK64
        x ^= x >> 27
        self._state = x
        return (x * self.MULTIPLIER) & MASK64

    def uniform(self) -> float:
        """Uniform on (0, 1], 53-bit resolution."""
        return ((self.next_u64() >> 11) + 1) * (1.0 / (1 << 53))

    def normal(self) -> float:
        """Standard normal via Box-Muller; the second variate is cached."""
        if self._spare is not None:
            z, self._spare = self._spare, None
            return z
        u1 = self.uniform()
        u2 = self.uniform()
        radius = math.sqrt(-2.0 * math.log(u1))
        angle = 2.0 * math.pi * u2
        self._spare = radius * math.sin(angle)
        return radius * math.cos(angle)

    def normal_array(self, shape: tuple[int, ...], sigma: float = 1.0) -> np.ndarray:
        n = int(np.prod(shape))
        return np.array([self.normal() for _ in range(n)], dtype=np.float64).reshape(shape) * sigma
