"""Deterministic random streams.

A master seed fans out to independent per-task streams through the
``spawn_key`` of a :class:`numpy.random.SeedSequence`; the bit generator is
the counter-based Philox, so stream ``(seed, k)`` is the same no matter which
worker or in which order it is drawn.
"""

import numpy as np


def make_rng(seed, *keys):
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))
