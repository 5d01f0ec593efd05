"""Reproducible random streams derived from one master seed.

Every step of the pipeline, and every item inside a step, gets its own
numpy Generator keyed by (seed, step, index). Results therefore do not
depend on the order or the thread in which items are processed.
"""
from enum import IntEnum

import numpy as np


class Step(IntEnum):
    QUERY = 0
    FLATTEN = 1
    ENRICH = 2
    ANONYMIZE = 3


def derive_rng(seed: int, step: Step, *index: int) -> np.random.Generator:
    """Return the Generator for a pipeline step, optionally for one item of it."""
    sequence = np.random.SeedSequence(seed & (2 ** 64 - 1), spawn_key=(int(step),) + tuple(index))
    return np.random.default_rng(sequence)
