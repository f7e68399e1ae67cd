"""Reproducible random streams for parallel replica simulation.

Every replica gets its own generator derived from ``(seed, replica_index)``
through numpy's ``SeedSequence`` spawn-key mechanism, so stream identity does
not depend on how replicas are batched across workers or in what order they
run.  Within a replica all draws come from that single generator.
"""

from __future__ import annotations

import numpy as np

_U64 = 1 << 64


def check_seed(seed: int) -> int:
    """Validate a 64-bit unsigned seed and return it as a plain int."""
    seed = int(seed)
    if not 0 <= seed < _U64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def replica_rng(seed: int, replica_index: int) -> np.random.Generator:
    """Independent generator for one replica of a seeded experiment."""
    if replica_index < 0:
        raise ValueError(f"replica_index must be nonnegative, got {replica_index}")
    ss = np.random.SeedSequence(entropy=check_seed(seed), spawn_key=(int(replica_index),))
    return np.random.Generator(np.random.PCG64(ss))


def float_key(x: float) -> int:
    """Stable integer key for a float (its IEEE-754 bit pattern)."""
    return int(np.float64(x).view(np.uint64))


def derive_seed(seed: int, *keys: int) -> int:
    """Derive a sub-experiment seed from a base seed and integer keys.

    Used to give, e.g., every horizon T in a sweep its own seed so results
    do not depend on sweep order.
    """
    ss = np.random.SeedSequence(entropy=[check_seed(seed)] + [int(k) & (_U64 - 1) for k in keys])
    return int(ss.generate_state(1, dtype=np.uint64)[0])
