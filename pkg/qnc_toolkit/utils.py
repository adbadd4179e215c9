"""
Utility functions for the QNC toolkit.
"""

import os
from typing import Optional, Union

import numpy as np

from .exceptions import ConfigError

WORKERS_ENV_VAR = "QNC_MAX_WORKERS"

SeedLike = Union[None, int, np.random.SeedSequence, np.random.Generator]

# Purpose slots of the per-trial seed hierarchy
SEED_GRAPH = 0
SEED_TRANSFORM = 1
SEED_MESSAGES = 2
SEED_COEFFICIENTS = 3


def derive_seed(master_seed: int, *key: int) -> np.random.SeedSequence:
    """Child seed addressed by an index path under the master seed.

    The same (master_seed, key) always gives the same stream, independent of
    the order in which children are requested.

    Args:
        master_seed: Root seed of the experiment
        key: Index path, e.g. (edge_index, sparsity_index, trial, purpose)

    Returns:
        SeedSequence usable with numpy.random.default_rng
    """
    return np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in key))


def worker_cap(requested: Optional[int] = None) -> int:
    """Number of pool workers, capped by the QNC_MAX_WORKERS environment variable.

    Args:
        requested: Worker count from the configuration (None means all CPUs)

    Returns:
        Positive worker count
    """
    workers = requested or os.cpu_count() or 1
    raw = os.environ.get(WORKERS_ENV_VAR)
    if raw is not None and raw.strip() != "":
        try:
            cap = int(raw)
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV_VAR} must be a positive integer, got {raw!r}")
        if cap < 1:
            raise ConfigError(f"{WORKERS_ENV_VAR} must be a positive integer, got {raw!r}")
        workers = min(workers, cap)
    return max(1, workers)
