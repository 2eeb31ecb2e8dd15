"""Counter-based random streams keyed by ``(seed, index, domain)``.

Each stream is a Philox generator whose 128-bit key packs the 64-bit
user seed with a 64-bit stream index (e.g. a trajectory number), and
whose top counter word carries a domain tag so that different consumers
of the same seed never share draws.  Any single stream can therefore be
regenerated on its own, independent of how work was scheduled.
"""

from __future__ import annotations

import os
import zlib

import numpy as np

_MASK64 = (1 << 64) - 1


def domain_tag(domain: str) -> int:
    return zlib.crc32(domain.encode("utf-8"))


def keyed_generator(seed: int, index: int = 0, domain: str = "") -> np.random.Generator:
    seed = int(seed)
    index = int(index)
    if not (0 <= seed <= _MASK64) or not (0 <= index <= _MASK64):
        raise ValueError("seed and index must be unsigned 64-bit integers")
    bitgen = np.random.Philox(
        key=(index << 64) | seed,
        counter=np.array([0, 0, 0, domain_tag(domain)], dtype=np.uint64),
    )
    return np.random.Generator(bitgen)


def default_seed() -> int | None:
    """Seed from the ``RMDP_SEED`` environment variable, if set."""
    value = os.environ.get("RMDP_SEED")
    return None if value in (None, "") else int(value, 0)
