import numpy as np


def make_rng(seed) -> np.random.Generator:
    """Counter-based Philox generator; streams are identical across platforms."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(seed))


def child_seeds(seed: int, count: int) -> list[np.random.SeedSequence]:
    """Independent sub-streams derived from a single user seed."""
    return np.random.SeedSequence(seed).spawn(count)
