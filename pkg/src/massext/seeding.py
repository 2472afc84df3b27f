"""Deterministic RNG stream derivation for reproducible parallel Monte Carlo.

All randomness in the package flows from a single 64-bit master seed.
``substream(master_seed, *key)`` hands out an independent Philox
(counter-based) generator for every distinct key tuple; two calls with the
same arguments always return generators producing identical streams, and
streams for different keys never collide (SeedSequence hashes the key into
the counter initialisation, with domain separation between key tuples of
different length).

Replica r of a Monte Carlo estimate uses ``substream(master, *prefix, r)``,
so results are independent of how replicas are scheduled over workers.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def substream(master_seed: int, *key: int) -> np.random.Generator:
    """Independent Philox generator keyed by (master_seed, *key)."""
    ss = np.random.SeedSequence(
        entropy=int(master_seed) & _MASK64,
        spawn_key=tuple(int(k) & _MASK64 for k in key),
    )
    return np.random.Generator(np.random.Philox(ss))
