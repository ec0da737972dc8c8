"""Master seed -> independent per-component random streams.

Each component's stream is ``SeedSequence(master, spawn_key=(crc32(name),
*extra))``. Keys are derived from names, not from creation order, so adding
a component never shifts the streams of existing ones.
"""

from __future__ import annotations

import zlib

import numpy as np


def spawn_key(name, *extra):
    return (zlib.crc32(name.encode("utf-8")), *(int(x) for x in extra))


def seed_sequence(master, name, *extra):
    return np.random.SeedSequence(int(master), spawn_key=spawn_key(name, *extra))


def component_rng(master, name, *extra):
    return np.random.default_rng(seed_sequence(master, name, *extra))


def derived_seed(master, name, *extra):
    """A plain 63-bit integer seed, for places that store seeds as numbers."""
    return int(seed_sequence(master, name, *extra).generate_state(1, np.uint64)[0] >> np.uint64(1))
