"""Deterministic RNG derivation.

Every randomized procedure in the pipeline draws from a generator derived
from the single top-level seed plus a tuple of string/int tags, so artifacts
are reproducible from the config seed alone and independent stages never
share streams.
"""

import hashlib

import numpy as np


def derive_key(seed: int, *tags) -> int:
    """Stable 64-bit key from the top-level seed and a tag path."""
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(seed)).encode())
    for tag in tags:
        h.update(b"/")
        h.update(str(tag).encode())
    return int.from_bytes(h.digest(), "little")


def rng_for(seed: int, *tags) -> np.random.Generator:
    """Generator for one named purpose, e.g. ``rng_for(seed, "scene", idx)``."""
    return np.random.Generator(np.random.PCG64(derive_key(seed, *tags)))
