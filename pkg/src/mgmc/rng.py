"""Deterministic random streams keyed by (purpose, step, cell).

Every stochastic stage draws from its own stream so results do not depend on
the order in which cells are processed or on the number of workers.
"""

import numpy as np

INIT = 0
COLLIDE = 1
INFLOW = 2
MATCH = 3
REALIZATION = 4


def stream(seed: int, purpose: int, step: int = 0, cell: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(purpose, step, cell))
    return np.random.Generator(np.random.PCG64(ss))


def derived_seed(seed: int, index: int) -> int:
    """Child seed for realization ``index`` of a study rooted at ``seed``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(REALIZATION, index))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
