"""Seeded random streams.

Every stream is a NumPy ``Generator`` over PCG64, seeded by a
``SeedSequence(seed, spawn_key=(stream, ...))``. Identical ``(seed, stream)``
pairs always yield identical draws, and distinct streams are statistically
independent.
"""
from __future__ import annotations

import numpy as np

__all__ = ["make_rng", "SAMPLER_STREAM", "NOISE_STREAM"]

SAMPLER_STREAM = 0
NOISE_STREAM = 1


def make_rng(seed: int, stream: int = 0, *substreams: int) -> np.random.Generator:
    if seed < 0 or stream < 0:
        raise ValueError("seed and stream must be non-negative")
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream), *map(int, substreams)))
    return np.random.Generator(np.random.PCG64(ss))
