"""Deterministic seeded sampling of circle points.

A golden-ratio Kronecker sequence with a seed-derived offset: low discrepancy,
reproducible bit-for-bit, and (being equidistributed) it avoids the countable
singular set.
"""

import numpy as np

_GOLDEN = 0.6180339887498949  # frac(1/phi)


def _splitmix64(seed):
    z = (seed + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return z ^ (z >> 31)


def seed_offset(seed):
    """Map a 64-bit seed to an offset in [0, 1)."""
    return _splitmix64(int(seed) & 0xFFFFFFFFFFFFFFFF) / 2.0 ** 64


def sample_circle(n, seed=0):
    """n low-discrepancy points in [-1, 1)."""
    u0 = seed_offset(seed)
    i = np.arange(n, dtype=float)
    return ((u0 + i * _GOLDEN) % 1.0) * 2.0 - 1.0


def sample_interval(n, lo, hi, seed=0):
    """n low-discrepancy points in (lo, hi)."""
    u0 = seed_offset(seed)
    i = np.arange(n, dtype=float)
    return lo + ((u0 + i * _GOLDEN) % 1.0) * (hi - lo)


def chebyshev_interior(lo, hi, n):
    """Chebyshev-spaced interior nodes of [lo, hi] (deterministic grids)."""
    k = np.arange(1, n + 1, dtype=float)
    t = np.cos((2.0 * k - 1.0) / (2.0 * n) * np.pi)
    return 0.5 * (lo + hi) + 0.5 * (hi - lo) * t
