"""Labeled RNG splitting: every random stream is a pure function of (seed, labels)."""

from __future__ import annotations

import zlib

import numpy as np


def _word(label) -> int:
    if isinstance(label, (int, np.integer)) and not isinstance(label, bool):
        return int(label) & 0xFFFFFFFF
    return zlib.crc32(str(label).encode("utf-8"))


def rng_for(seed: int, *labels) -> np.random.Generator:
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [_word(x) for x in labels]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def child_seed(rng: np.random.Generator) -> int:
    """Draw a base seed from a caller-supplied generator."""
    return int(rng.integers(0, 2**63 - 1))
