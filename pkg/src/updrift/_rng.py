"""Deterministic per-trial random streams."""

import numpy as np

DEFAULT_SEED = 20190713


def trial_rng(seed: int, index: int, *extra: int) -> np.random.Generator:
    """Return the generator for trial ``index`` under master ``seed``.

    The stream depends only on ``(seed, index, *extra)`` through the
    SeedSequence entropy hash, so results do not depend on which worker
    runs which trial or in what order.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, index, *extra])))


def as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
