"""Seeded, splittable random streams.

Streams are derived from ``(seed, *keys)`` through NumPy's ``SeedSequence`` so
that a component's randomness does not depend on what other components drew
before it. String keys are hashed with CRC32, which is stable across
processes (unlike ``hash``).
"""

from __future__ import annotations

import zlib

import numpy as np


def _key_to_int(key) -> int:
    if isinstance(key, (int, np.integer)):
        return int(key) & 0xFFFFFFFFFFFFFFFF
    return zlib.crc32(str(key).encode("utf-8"))


def derive_seed(seed: int, *keys) -> np.random.SeedSequence:
    return np.random.SeedSequence([_key_to_int(seed), *(_key_to_int(k) for k in keys)])


def make_rng(seed: int, *keys) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(seed, *keys)))
