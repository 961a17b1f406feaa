"""Seed derivation and generator construction.

Every random stream is a Philox (counter-based) generator keyed by a
``SeedSequence`` built from a master seed plus an integer spawn key, e.g.
``(row, trial)`` in a sweep or ``(clause_type,)`` inside the formula
generator. Streams therefore depend only on (seed, key) and never on
scheduling or worker count.
"""

from __future__ import annotations

import numpy as np

SEED_MASK = (1 << 64) - 1


def make_rng(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed) & SEED_MASK, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, *key: int) -> int:
    """64-bit child seed for the stream ``(seed, *key)``."""
    ss = np.random.SeedSequence(int(seed) & SEED_MASK, spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])
