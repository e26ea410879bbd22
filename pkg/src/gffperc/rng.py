"""Deterministic, splittable random streams for reproducible Monte Carlo.

Every experiment draws from a counter-based Philox generator whose key is
derived from a 64-bit master seed plus an integer path (experiment index,
replica index, draw block, ...).  Streams are stateless values: the same
(seed, path, count) always yields the same numbers, independent of worker
count or evaluation order.

Uniform-to-normal transform, fixed once and for all: each raw 64-bit word
is mapped to the open interval (0, 1) via ``((w >> 11) + 0.5) * 2^-53`` and
pushed through the inverse normal CDF (``scipy.special.ndtri``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

__all__ = ["StreamKey", "derive", "next_standard_normals", "next_uniforms"]

_U64_SHIFT = np.uint64(11)
_U53_SCALE = 2.0 ** -53


@dataclass(frozen=True)
class StreamKey:
    """Value-like handle for one deterministic random stream."""

    master_seed: int
    path: tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not 0 <= int(self.master_seed) < 2 ** 64:
            raise ValueError("master_seed must fit in 64 bits")
        if any(i < 0 for i in self.path):
            raise ValueError("path indices must be nonnegative")


def derive(key: StreamKey, index: int) -> StreamKey:
    """Child stream `index` of `key`; distinct indices give independent streams."""
    return StreamKey(key.master_seed, key.path + (int(index),))


def _bit_generator(key: StreamKey) -> np.random.Philox:
    ss = np.random.SeedSequence(entropy=key.master_seed, spawn_key=key.path)
    return np.random.Philox(ss)


def raw_words(key: StreamKey, count: int) -> np.ndarray:
    """First `count` raw 64-bit words of the stream."""
    if count < 0:
        raise ValueError("count must be >= 0")
    if count == 0:
        return np.empty(0, dtype=np.uint64)
    return _bit_generator(key).random_raw(count)


def words_to_uniform(words: np.ndarray) -> np.ndarray:
    # open interval (0,1): every value is in [2^-54, 1 - 2^-54]
    return ((words >> _U64_SHIFT).astype(np.float64) + 0.5) * _U53_SCALE


def next_uniforms(key: StreamKey, count: int) -> np.ndarray:
    """`count` uniforms on the open interval (0, 1)."""
    return words_to_uniform(raw_words(key, count))


def next_standard_normals(key: StreamKey, count: int) -> np.ndarray:
    """`count` i.i.d. standard normals via the fixed inverse-CDF transform."""
    return ndtri(next_uniforms(key, count))


def normal_matrix(key: StreamKey, rows: int, cols: int, start: int = 0) -> np.ndarray:
    """Stack per-row substreams: row i is ``next_standard_normals(derive(key, start + i), cols)``.

    The raw words are gathered row by row but transformed in one vectorized
    pass, which is bit-identical to transforming each row separately.
    """
    out = np.empty((rows, cols), dtype=np.uint64)
    for i in range(rows):
        out[i] = raw_words(derive(key, start + i), cols)
    return ndtri(words_to_uniform(out))
