"""Deterministic RNG derivation.

Every stochastic choice in a run derives its generator from the run seed plus
a structured key (purpose string, task index, step, sample index, ...), so
repeated runs with the same config are bit-identical and parallel consumers
never share generator state.
"""

from __future__ import annotations

import zlib

import numpy as np


def _as_int(key) -> int:
    if isinstance(key, (int, np.integer)):
        return int(key)
    if isinstance(key, str):
        return zlib.crc32(key.encode("utf-8"))
    raise TypeError(f"unsupported seed key {key!r}")


def derive_rng(base_seed: int, *keys) -> np.random.Generator:
    """Generator for (base_seed, keys); stable across calls and platforms."""
    entropy = [int(base_seed)] + [_as_int(k) for k in keys]
    return np.random.default_rng(np.random.SeedSequence(entropy))
