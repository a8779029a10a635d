"""Counter-based integer hashing (splitmix64) for reproducible randomness.

Everything random in the toolkit (wave phases, sensor noise, supersampling
jitter, parameter sampling) is a pure function of integer keys hashed here, so
results never depend on evaluation order, batch size or worker count.
"""

from __future__ import annotations

import zlib

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MUL1 = np.uint64(0xBF58476D1CE4E5B9)
_MUL2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV_2_53 = 1.0 / 9007199254740992.0

MASK64 = (1 << 64) - 1


def as_u64(x) -> np.ndarray:
    """Reinterpret integers (including negative ones) as uint64, wrapping mod 2**64."""
    arr = np.asarray(x)
    if arr.dtype == np.uint64:
        return arr
    if arr.dtype.kind in "iu":
        return arr.astype(np.int64).view(np.uint64) if arr.dtype.kind == "i" else arr.astype(np.uint64)
    if arr.dtype == object or arr.dtype.kind == "O":
        return np.array([int(v) & MASK64 for v in arr.ravel()], dtype=np.uint64).reshape(arr.shape)
    raise TypeError(f"cannot hash values of dtype {arr.dtype}")


def splitmix64(x) -> np.ndarray:
    z = as_u64(x)
    with np.errstate(over="ignore"):
        z = z + _GOLDEN
        z = (z ^ (z >> _S30)) * _MUL1
        z = (z ^ (z >> _S27)) * _MUL2
    return z ^ (z >> _S31)


def key(*parts) -> np.ndarray:
    """Hash a sequence of integer keys (scalars or broadcastable arrays)."""
    h = splitmix64(np.uint64(0x5EA5EED))
    for p in parts:
        if isinstance(p, int) and not isinstance(p, bool):
            p = np.uint64(p & MASK64)
        h = splitmix64(h ^ as_u64(p))
    return h


def to_unit(h) -> np.ndarray:
    """Map uint64 hashes to floats uniformly distributed in [0, 1)."""
    return (as_u64(h) >> _S11).astype(np.float64) * _INV_2_53


def uniform(*parts) -> np.ndarray:
    return to_unit(key(*parts))


def normal(*parts) -> np.ndarray:
    """Standard normal deviates via Box-Muller on two hashed uniforms."""
    u1 = to_unit(key(*parts, 1))
    u2 = to_unit(key(*parts, 2))
    r = np.sqrt(-2.0 * np.log1p(-u1))
    return r * np.cos(2.0 * np.pi * u2)


def name_id(name: str) -> int:
    """Stable integer id for a textual field name."""
    return zlib.crc32(name.encode("utf-8"))


def seed_for(master_seed: int, index: int) -> int:
    """Per-sample seed derived from a master seed and a sample index."""
    return int(key(int(master_seed), int(index), name_id("render-seed")))
