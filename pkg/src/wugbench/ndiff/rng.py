"""Seeded random number streams.

All stochastic corners of the code (parameter init, dropout, shuffling,
sampling) draw from generators built here, so a (seed, stream) pair pins
every random decision of a run.
"""

from __future__ import annotations

import numpy as np


def seeded_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """A PCG64 generator keyed by (seed, stream).

    Distinct streams under the same seed are statistically independent, so
    e.g. dropout noise can change without disturbing init draws.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, stream))))


# stream ids used across the package; keep stable or checkpoints of the
# same seed stop being reproducible
INIT_STREAM = 0
DROPOUT_STREAM = 1
SHUFFLE_STREAM = 2
SAMPLE_STREAM = 3
