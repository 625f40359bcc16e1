"""Seeded counter-based random streams.

Each stream is a Philox generator keyed by a tuple of integers (and short
strings), so work items such as ``(master_seed, n, trial)`` get independent
reproducible streams no matter which worker runs them or in which order.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key_int(part) -> int:
    if isinstance(part, (bool, np.bool_)):
        return int(part)
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError("stream keys must be non-negative")
        return int(part)
    if isinstance(part, str):
        return zlib.crc32(part.encode())
    raise TypeError(f"unsupported stream key {part!r}")


def stream(seed, *key) -> np.random.Generator:
    """Generator for the stream identified by ``(seed, *key)``."""
    entropy = [_key_int(seed), *(_key_int(k) for k in key)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
