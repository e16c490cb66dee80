"""Seeded random streams.

All randomness goes through Philox, a counter-based generator. A stream is keyed
by the experiment seed plus a tuple of integers (replicate id, purpose, time
step, ...), so replicates draw the same numbers no matter how they are
scheduled across workers.
"""

from typing import Union

import numpy as np

SeedLike = Union[int, np.random.Generator]

# purpose ids for per-replicate streams
STREAM_GRAPH = 0
STREAM_PATIENT_ZERO = 1
STREAM_OBSERVATIONS = 2
STREAM_MASK = 3
STREAM_CV = 4


def make_rng(seed: SeedLike, *stream: int) -> np.random.Generator:
    """Return a Philox generator keyed by (seed, *stream).

    A Generator passed as seed is returned unchanged when no stream is given.
    """
    if isinstance(seed, np.random.Generator):
        if stream:
            raise TypeError("stream ids need an integer seed")
        return seed
    if int(seed) < 0:
        raise ValueError(f"seed must be nonnegative, got {seed}")
    sequence = np.random.SeedSequence([int(seed), *(int(s) for s in stream)])
    return np.random.Generator(np.random.Philox(sequence))


def derive_seed(seed: int, *stream: int) -> int:
    """Integer seed for libraries that take an int (networkx generators)."""
    sequence = np.random.SeedSequence([int(seed), *(int(s) for s in stream)])
    return int(sequence.generate_state(1, dtype=np.uint32)[0])
