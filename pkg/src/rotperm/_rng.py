"""Keyed random streams.

Every draw comes from a generator keyed by ``(seed, role, *labels)`` through
``numpy.random.SeedSequence.spawn_key``.  Results therefore do not depend on the
order in which clusters, occasions or replicates are processed.
"""

from __future__ import annotations

from enum import IntEnum

import numpy as np

Seed = int | tuple[int, ...]


class Role(IntEnum):
    LONGITUDINAL = 1
    CROSS_SECTIONAL = 2
    REPLICATE = 3
    REPETITION = 4
    PARAMETERS = 5
    TEST = 6


def _entropy(seed: Seed) -> list[int]:
    if isinstance(seed, (int, np.integer)):
        return [int(seed)]
    return [int(s) for s in seed]


def stream(seed: Seed, role: Role, *labels: int) -> np.random.Generator:
    """Generator for one ``(role, labels)`` key under ``seed``."""
    ss = np.random.SeedSequence(_entropy(seed), spawn_key=(int(role), *map(int, labels)))
    return np.random.Generator(np.random.PCG64(ss))


def child_seed(seed: Seed, role: Role, *labels: int) -> tuple[int, ...]:
    """A derived seed tuple; feeding it to :func:`stream` gives an independent family."""
    return (*_entropy(seed), int(role), *map(int, labels))
