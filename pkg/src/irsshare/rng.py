"""Named, counter-based random streams.

Every random draw in the package goes through :func:`stream`, which maps
``(seed, drop_index, purpose_tag, *extra)`` to an independent Philox
generator. Draw order across workers therefore never matters.
"""
from __future__ import annotations

import zlib

import numpy as np

U64_MAX = 2**64 - 1


def _tag_key(tag: str) -> int:
    return zlib.crc32(tag.encode("utf-8"))


def stream(seed: int, drop: int, tag: str, *extra: int) -> np.random.Generator:
    if not 0 <= seed <= U64_MAX:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    if drop < 0:
        raise ValueError(f"drop index must be >= 0, got {drop}")
    key = (int(drop), _tag_key(tag), *(int(e) for e in extra))
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))
