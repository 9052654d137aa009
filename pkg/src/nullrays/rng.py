"""Deterministic, order-independent random streams.

Every randomized check draws from its own counter-based stream, keyed by
the run seed and a stable hash of the stream name.  Streams are therefore
independent of execution order and of each other — running checks in
parallel or skipping some cannot change the numbers any other check sees.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["stream"]


def stream(seed: int, name: str) -> np.random.Generator:
    """Generator for the (seed, name) stream."""
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    sub = int.from_bytes(digest[:8], "big")
    key = np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF), np.uint64(sub)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
