"""Deterministic derivation of independent random streams from one master seed.

Every stochastic component (workload generation, each colony, each ant) draws
from its own namespaced substream, so sequential and concurrent execution of
independent components produce identical results for a given master seed.
"""
from __future__ import annotations

import numpy as np

# Top-level stream namespaces.  Solver streams extend the key with
# (round, colony, generation, ant); keeping the first component distinct
# guarantees the workload generator never collides with a solver stream.
STREAM_SOLVER = 0
STREAM_WORKLOAD = 1


def subsequence(master_seed: int, *key: int) -> np.random.SeedSequence:
    """SeedSequence for the component addressed by `key` under `master_seed`."""
    return np.random.SeedSequence(master_seed, spawn_key=tuple(key))


def substream(master_seed: int, *key: int) -> np.random.Generator:
    """Generator for the component addressed by `key` under `master_seed`."""
    return np.random.default_rng(subsequence(master_seed, *key))
