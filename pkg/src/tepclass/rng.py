"""Seed derivation.

All randomness flows from numpy's PCG64 bit generator. Child seeds are
derived by hashing a parent seed together with a path of integer keys
through :class:`numpy.random.SeedSequence` (``spawn_key``), so a stream
depends only on ``(seed, *path)`` and never on execution order or on how
work is split across processes.
"""

import numpy as np


def derive_seed(seed: int, *path: int) -> int:
    """Hash ``seed`` and ``path`` into a new 63-bit integer seed."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(p) for p in path))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


def generator(seed: int, *path: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=tuple(int(p) for p in path)))
    )
