"""Keyed counter-based random streams.

Every random draw in the package comes from a Philox4x64 generator whose
128-bit key is ``(seed, stream)``. Replicate ``r`` of an experiment uses
stream ``r``, so replicates are independent and can be computed in any
order or on any worker. A retry index, when needed, goes into the top word
of the counter, far beyond anything a single replicate consumes.
"""
from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1


def stream(seed: int, index: int = 0, retry: int = 0) -> np.random.Generator:
    """Generator for stream key ``(seed, index)`` at retry ``retry``."""
    for name, value in (("seed", seed), ("index", index), ("retry", retry)):
        if not 0 <= value <= MASK64:
            raise ValueError(f"{name} must be an unsigned 64-bit integer, got {value}")
    key = (int(seed) & MASK64) | ((int(index) & MASK64) << 64)
    counter = np.array([0, 0, 0, retry], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(counter=counter, key=key))


def fresh_seed() -> int:
    """A random 64-bit seed from OS entropy (for callers that were not given one)."""
    return int(np.random.SeedSequence().generate_state(1, dtype=np.uint64)[0])
