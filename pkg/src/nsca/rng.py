"""Seeded random streams, one per named subsystem."""

from __future__ import annotations

import zlib

import numpy as np


def make_rng(seed, namespace: str, *extra) -> np.random.Generator:
    """Independent generator for ``(seed, namespace, *extra)``.

    The namespace is hashed with CRC32 so streams are stable across Python
    processes, unlike the builtin ``hash``.
    """
    if int(seed) < 0:
        raise ValueError("seed must be nonnegative")
    key = [int(seed), zlib.crc32(namespace.encode())]
    for item in extra:
        if isinstance(item, str):
            key.append(zlib.crc32(item.encode()))
        else:
            key.append(int(item) & 0xFFFFFFFF)
    return np.random.default_rng(key)
