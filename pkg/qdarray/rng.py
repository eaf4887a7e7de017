"""Counter-Based Random Streams

Every random number in the simulator is a pure function of a seed and a tuple
of keys (row, column, field tag, point index, ...). Adding dots or bias points
never reshuffles existing draws, and evaluation order never matters.
"""

import hashlib
from typing import Union

import numpy as np
from scipy.special import ndtri

KeyLike = Union[int, str, np.ndarray]

MASK64 = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def tag_key(tag: str) -> int:
    """Stable 64-bit integer for a text tag."""
    digest = hashlib.blake2b(tag.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def _as_u64(key: KeyLike) -> np.ndarray:
    if isinstance(key, str):
        return np.atleast_1d(np.asarray(tag_key(key), dtype=np.uint64))
    arr = np.asarray(key)
    if arr.dtype.kind == "u":
        return np.atleast_1d(arr.astype(np.uint64))
    if arr.dtype.kind == "i":
        if np.any(arr < 0):
            raise ValueError("random stream keys must be non-negative")
        return np.atleast_1d(arr.astype(np.uint64))
    if isinstance(key, int):
        return np.atleast_1d(np.asarray(key & MASK64, dtype=np.uint64))
    raise TypeError(f"unsupported key type {type(key)!r}")


def _splitmix64(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = x + _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))


def counter_hash(seed: int, *keys: KeyLike) -> np.ndarray:
    """Hash a seed and a sequence of (broadcastable) keys to uint64 values.

    Args:
        seed: 64-bit seed
        *keys: Integers, text tags or integer arrays; arrays broadcast

    Returns:
        np.ndarray: uint64 array of the broadcast shape (at least 1-D)
    """
    h = _splitmix64(_as_u64(int(seed) & MASK64))
    for key in keys:
        h = _splitmix64(h ^ _as_u64(key))
    return h


def uniform(seed: int, *keys: KeyLike) -> np.ndarray:
    """Uniform draws in the open interval (0, 1)."""
    h = counter_hash(seed, *keys)
    return ((h >> np.uint64(11)).astype(np.float64) + 0.5) / float(1 << 53)


def normal(seed: int, *keys: KeyLike) -> np.ndarray:
    """Standard normal draws by inverse-CDF of the uniform stream."""
    return ndtri(uniform(seed, *keys))


def derive_seed(master: int, *keys: KeyLike) -> int:
    """Child seed for an independent sub-stream (sample, record, ...)."""
    return int(counter_hash(master, *keys)[0])
