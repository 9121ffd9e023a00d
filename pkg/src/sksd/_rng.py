"""Counter-based child seeds: a child stream depends only on (seed, index, name)."""
from __future__ import annotations

import zlib

import numpy as np

_MASK63 = (1 << 63) - 1


def _sequence(seed: int, index: int, stream: str) -> np.random.SeedSequence:
    if seed < 0:
        raise ValueError(f"seeds must be non-negative, got {seed}")
    return np.random.SeedSequence(
        entropy=int(seed), spawn_key=(int(index), zlib.crc32(stream.encode()))
    )


def child_seed(seed: int, index: int, stream: str) -> int:
    """A 63-bit integer seed derived from ``(seed, index, stream)``."""
    lo, hi = _sequence(seed, index, stream).generate_state(2, dtype=np.uint32)
    return ((int(hi) << 32) | int(lo)) & _MASK63


def child_rng(seed: int, index: int, stream: str) -> np.random.Generator:
    return np.random.default_rng(_sequence(seed, index, stream))
