"""Reproducible random substreams for replica-parallel Monte Carlo."""

import numpy as np


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for a fixed (seed, key) pair.

    Built on Philox (counter-based), keyed through SeedSequence spawn keys,
    so the stream assigned to a replica chunk is identical no matter how
    chunks are scheduled across workers.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))
