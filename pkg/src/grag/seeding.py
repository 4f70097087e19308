"""Single-seed fan-out: every consumer of randomness gets ``seed XOR fnv1a64(tag)``."""

from __future__ import annotations

import numpy as np

from grag.encoder import MASK64, fnv1a_64


def derive_seed(seed: int, tag: str) -> int:
    return (seed & MASK64) ^ fnv1a_64(tag.encode("utf-8"))


def rng_for(seed: int, tag: str, *extra: int) -> np.random.Generator:
    s = derive_seed(seed, tag)
    return np.random.default_rng([s & 0xFFFFFFFF, s >> 32, *extra])
