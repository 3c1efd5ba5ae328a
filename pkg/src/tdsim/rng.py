"""SplitMix64 streams and a counter-based uniform generator.

SplitMix64 (Steele, Lea & Flood) advances a 64-bit state by the golden-ratio
increment ``0x9E3779B97F4A7C15`` and scrambles it with the finaliser

    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    z =  z ^ (z >> 31)

all modulo 2**64. Everything here is integer arithmetic, so streams are
bit-identical across platforms.

The counter-based generator hashes a tuple of integer keys
``(seed, k1, k2, ...)`` by folding each key into the state with one
finaliser round. Any entry of the stream can be produced independently,
which lets Monte Carlo samples be keyed by (seed, term, bin, sample).
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB

_U64 = np.uint64


def mix64(z: int) -> int:
    """SplitMix64 finaliser on a Python int."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


class SplitMix64:
    """Sequential SplitMix64 stream."""

    def __init__(self, seed: int):
        self.state = int(seed) & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK64
        return mix64(self.state)

    def next_double(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * 2.0**-53


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> _U64(30))
    z = z * _U64(MIX1)
    z = z ^ (z >> _U64(27))
    z = z * _U64(MIX2)
    return z ^ (z >> _U64(31))


def counter_u64(seed: int, *keys) -> np.ndarray:
    """Hash ``(seed, *keys)`` to uint64; the last key may be an integer array."""
    z = np.array([mix64(int(seed) + GOLDEN)], dtype=_U64)
    with np.errstate(over="ignore"):
        for key in keys:
            k = np.asarray(key).astype(np.int64).astype(_U64)
            z = _mix64_array(z ^ _mix64_array(k + _U64(GOLDEN)))
    return z


def counter_uniform(seed: int, *keys) -> np.ndarray:
    """Uniform doubles in [0, 1) keyed by ``(seed, *keys)``."""
    bits = counter_u64(seed, *keys) >> _U64(11)
    return bits.astype(np.float64) * 2.0**-53
