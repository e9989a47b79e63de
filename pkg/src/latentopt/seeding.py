"""Deterministic derivation of named RNG streams from one 64-bit seed.

Every random draw in a run flows from the top-level seed through
``derive_seed(seed, role, *indices)``; the role tag keeps independent
subsystems (direction sampling, landscape axes, start sets) on
non-overlapping streams.
"""

import numpy as np

MASK64 = (1 << 64) - 1


def derive_seed(seed, role, *indices):
    entropy = [int(seed) & MASK64, int.from_bytes(role.encode(), "big") & MASK64]
    entropy.extend(int(i) & MASK64 for i in indices)
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0])


def rng_stream(seed, role, *indices):
    return np.random.default_rng(derive_seed(seed, role, *indices))
