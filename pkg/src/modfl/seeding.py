"""Named random sub-streams derived from one root seed."""
from __future__ import annotations

import zlib

import numpy as np

STREAMS = ("data", "init", "training", "ot")


def sub_seed(root: int, stream: str, *keys: int) -> int:
    """A 63-bit seed for ``stream`` (and optional integer keys) under ``root``.

    Streams are independent of each other and of the order in which they are
    requested, so switching one component off never shifts another's draws.
    """
    tag = zlib.crc32(stream.encode())
    ss = np.random.SeedSequence([int(root) & 0xFFFFFFFF, tag, *[int(k) & 0xFFFFFFFF for k in keys]])
    return int(ss.generate_state(2, dtype=np.uint32).astype(np.uint64) @ np.array([1 << 31, 1], dtype=np.uint64))


def generator(root: int, stream: str, *keys: int) -> np.random.Generator:
    return np.random.default_rng(sub_seed(root, stream, *keys))
