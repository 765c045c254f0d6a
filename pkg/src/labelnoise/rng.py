"""Seeded random streams.

Every random quantity in the package is drawn from a Philox counter-based
generator keyed by ``SeedSequence([seed, stream_id, *extra])``.  Philox output
is specified by its key and counter only, so a given seed reproduces the same
bits on every platform numpy supports.
"""

from __future__ import annotations

import zlib

import numpy as np


def stream_id(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


def make_rng(seed: int, name: str, *extra: int) -> np.random.Generator:
    """Return an independent generator for the named purpose.

    Different ``name`` values (e.g. ``"features"``, ``"noise"``) give
    statistically independent streams for the same master seed, so adding a
    consumer never shifts the draws of another.
    """
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    entropy = [int(seed), stream_id(name), *(int(e) for e in extra)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
