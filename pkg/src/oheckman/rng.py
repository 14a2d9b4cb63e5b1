"""Counter-based random streams keyed by (seed, position)."""

import numpy as np


def derived_generator(seed: int, *key: int) -> np.random.Generator:
    """Independent Philox stream for one unit of work.

    The stream depends only on ``seed`` and ``key``, so results do not change
    with the order or the worker that evaluates each unit.
    """
    sequence = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(sequence))
