"""Reproducible random streams.

Every stream is a Philox4x64 counter-based generator keyed by
``SeedSequence(seed, spawn_key=key)``. A key is a tuple of non-negative
integers naming the work item (run index, time step, stratum ordinal, trial
block), so a stream depends only on what it is used for, never on which
worker or in which order it runs.
"""

from __future__ import annotations

import os

import numpy as np

DEFAULT_SEED = 20220101
SEED_ENV = "RELIBAT_SEED"

SEED_MAX = (1 << 64) - 1


def resolve_seed(seed: int | None) -> int:
    """Explicit seed, else $RELIBAT_SEED, else the fixed default."""
    if seed is None:
        env = os.environ.get(SEED_ENV)
        seed = int(env) if env not in (None, "") else DEFAULT_SEED
    if not 0 <= seed <= SEED_MAX:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return seed


def stream(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))
