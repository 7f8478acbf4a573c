"""Counter-based pseudo-randomness shared by all backends.

Site rates on the (conceptually infinite) lattice and the per-walk jump
streams are pure functions of integer keys, built from the splitmix64
finalizer.  The same arithmetic is implemented three times -- plain Python
ints here, vectorized numpy uint64 below, and C uint64 in the compiled
kernels -- and all three must agree bit for bit; tests enforce this.
"""

from __future__ import annotations

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

# 2**-53, the spacing of the uniform grids below
_U53 = 1.0 / 9007199254740992.0


def mix64(z: int) -> int:
    """splitmix64 finalizer on a 64-bit integer."""
    z = (z + _GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def combine(h: int, v: int) -> int:
    """Fold one more integer (two's complement for negatives) into a hash."""
    return mix64(h ^ mix64(v & MASK64))


def key_hash(seed: int, *values: int) -> int:
    """Hash of (seed, values...); the basis for all counter-based draws."""
    h = mix64(seed & MASK64)
    for v in values:
        h = combine(h, v)
    return h


def uniform_halfopen(h: int) -> float:
    """Map a hash to [0, 1) on the 2**-53 grid."""
    return (h >> 11) * _U53


def uniform_open_low(h: int) -> float:
    """Map a hash to (0, 1]; used for rate draws whose support excludes 0."""
    return ((h >> 11) + 1) * _U53


def derive_seed(seed: int, *tags: int) -> int:
    """A new 64-bit seed for an independent purpose (replica, stream, ...)."""
    return key_hash(seed, *tags)


# -- vectorized twins ---------------------------------------------------------

def mix64_array(z: np.ndarray) -> np.ndarray:
    z = z.astype(np.uint64, copy=True)
    with np.errstate(over="ignore"):
        z += np.uint64(_GOLDEN)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        return z ^ (z >> np.uint64(31))


def combine_array(h: np.ndarray, v: np.ndarray) -> np.ndarray:
    return mix64_array(h ^ mix64_array(v.astype(np.uint64)))


def key_hash_array(seed: int, columns: list[np.ndarray]) -> np.ndarray:
    """Vectorized key_hash over aligned integer columns."""
    n = len(columns[0])
    h = np.full(n, mix64(seed & MASK64), dtype=np.uint64)
    for col in columns:
        h = combine_array(h, np.asarray(col, dtype=np.int64).view(np.uint64)
                          if np.asarray(col).dtype.kind == "i"
                          else np.asarray(col, dtype=np.uint64))
    return h


def uniform_open_low_array(h: np.ndarray) -> np.ndarray:
    return ((h >> np.uint64(11)).astype(np.float64) + 1.0) * _U53
