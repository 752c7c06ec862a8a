"""Seeded, splittable random streams.

Streams are Philox (counter-based) generators keyed by a base seed plus an
integer path, so e.g. trial ``(snr_index, trial_index)`` always sees the same
numbers regardless of which worker runs it or in what order.
"""
from __future__ import annotations

import numpy as np


def make_rng(seed=None, *keys):
    """Return a ``numpy.random.Generator`` for ``seed`` and the stream path ``keys``."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


def as_generator(rng):
    """Coerce ``None``, an int seed, or a Generator into a Generator."""
    if isinstance(rng, np.random.Generator):
        return rng
    return make_rng(rng)
