"""
Named, counter-based random streams.

Every stream is a Philox generator keyed by (seed, purpose, index). A particle's
initial draw depends only on (seed, particle_id), never on how many workers run
or in which order particles are produced.
"""
from enum import IntEnum

import numpy as np


class Stream(IntEnum):
    PARTICLES = 1
    RESPONSES = 2
    VERIFY = 3


def stream(seed: int, purpose: Stream, index: int = 0) -> np.random.Generator:
    if seed < 0:
        raise ValueError("seed must be non-negative")
    seq = np.random.SeedSequence(entropy=seed, spawn_key=(int(purpose), int(index)))
    return np.random.Generator(np.random.Philox(seq))


def particle_draws(seed: int, n: int, dim: int) -> np.ndarray:
    """(n, dim) standard normals; row i comes from substream (seed, i)."""
    return np.vstack([stream(seed, Stream.PARTICLES, i).standard_normal(dim) for i in range(n)])
