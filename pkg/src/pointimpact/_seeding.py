"""Counter-based seed derivation.

All randomness flows from one integer seed.  Independent streams are derived
from ``(seed, tag, index)`` through :class:`numpy.random.SeedSequence` spawn
keys, so a row or replication draws the same numbers no matter which worker
generates it or in which order.
"""

from __future__ import annotations

import zlib

import numpy as np


def _tag_key(tag: str) -> int:
    return zlib.crc32(tag.encode("utf-8"))


def stream(seed: int, tag: str, index: int = 0) -> np.random.Generator:
    """Generator for the ``index``-th stream of ``tag`` under ``seed``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(_tag_key(tag), int(index)))
    return np.random.default_rng(ss)


def child_seed(seed: int, tag: str, index: int = 0) -> int:
    """Derive a 63-bit integer seed, e.g. for one simulation replication."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(_tag_key(tag), int(index)))
    return int(ss.generate_state(1, dtype=np.uint64)[0]) & (2**63 - 1)


def row_normals(seed: int, tag: str, n_rows: int, n_cols: int) -> np.ndarray:
    """Standard normal matrix whose row ``i`` comes from its own stream."""
    out = np.empty((n_rows, n_cols))
    for i in range(n_rows):
        out[i] = stream(seed, tag, i).standard_normal(n_cols)
    return out
