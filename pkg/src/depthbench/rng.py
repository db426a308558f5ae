"""Pinned random stream used by every sampler in the package.

All randomness goes through numpy's Philox4x64-10 counter-based bit generator
keyed by an integer seed. Philox output depends only on (key, counter), so a
given seed yields the same stream on every platform and numpy version that
ships Philox. Samplers draw in a fixed documented order; see each caller.
"""
import numpy as np


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(int(seed)))
