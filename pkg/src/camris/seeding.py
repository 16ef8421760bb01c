"""Deterministic RNG derivation.

Every random draw in the pipeline comes from a named substream of a single
master seed, so individual stages (scene geometry, detector noise, weight
init, data shuffling) can be re-seeded independently and scene generation
stays order-independent and parallel-safe.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1

# Stream labels are part of the reproducibility contract: changing a key
# changes every dataset derived from it.
_STREAM_KEYS = {
    "scene": 0x5C,
    "detector": 0xDE,
    "ue_link": 0xCE,
    "bs_link": 0xB5,
    "init": 0x11,
    "shuffle": 0x5F,
    "split": 0x59,
}


def seed_sequence(master_seed: int, stream: str, *indices: int) -> np.random.SeedSequence:
    if stream not in _STREAM_KEYS:
        raise KeyError(f"unknown rng stream {stream!r}; known: {sorted(_STREAM_KEYS)}")
    entropy = [int(master_seed) & _MASK64, _STREAM_KEYS[stream]]
    entropy.extend(int(i) & _MASK64 for i in indices)
    return np.random.SeedSequence(entropy)


def substream(master_seed: int, stream: str, *indices: int) -> np.random.Generator:
    """Generator keyed by (master_seed, stream, *indices)."""
    return np.random.default_rng(seed_sequence(master_seed, stream, *indices))


def derived_seed(master_seed: int, stream: str, *indices: int) -> int:
    """Stable 64-bit seed keyed by (master_seed, stream, *indices)."""
    state = seed_sequence(master_seed, stream, *indices).generate_state(1, dtype=np.uint64)
    return int(state[0])
