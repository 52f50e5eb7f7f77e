"""Labeled seed derivation so each component draws from its own stream."""

import zlib

import numpy as np


def derive_seed(master: int, label: str, *extra: int) -> int:
    """64-bit seed for ``label`` under ``master``; stable across runs and platforms."""
    key = [int(master) & 0xFFFFFFFFFFFFFFFF, zlib.crc32(label.encode("utf-8"))]
    key.extend(int(e) for e in extra)
    return int(np.random.SeedSequence(key).generate_state(1, np.uint64)[0])


def rng_for(master: int, label: str, *extra: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, label, *extra))
