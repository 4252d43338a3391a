"""Deterministic stream splitting on a counter-based generator.

Every randomized component of the package draws from a Philox (counter-based,
64-bit) generator keyed by a master seed plus an integer path.  Two calls with
the same ``(seed, *path)`` produce identical streams; distinct paths give
statistically independent streams.  This makes parallel replication safe: a
worker only needs its path, and aggregation in fixed path order reproduces
the serial result bit for bit.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def _fold(path: tuple[int, ...]) -> int:
    """Mix an integer path into a single 64-bit key word (splitmix-style)."""
    h = 0x9E3779B97F4A7C15
    for p in path:
        h = (h ^ ((int(p) + 0xA076_1D64_78BD_642F) & _MASK64)) & _MASK64
        h = (h * 0xBF58476D1CE4E5B9) & _MASK64
        h ^= h >> 31
    return h


def substream(seed: int, *path: int) -> np.random.Generator:
    """Independent generator for the given seed and stream path."""
    key = np.array([int(seed) & _MASK64, _fold(path)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def derive_seed(seed: int, *path: int) -> int:
    """A 63-bit child seed, itself usable as a master seed."""
    return int(substream(seed, *path).integers(0, 1 << 63))
