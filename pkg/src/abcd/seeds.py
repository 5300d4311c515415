"""Deterministic substream derivation for reproducible runs.

All randomness in an episode, a design step, or a service session flows from a
single master seed. Independent consumers (observational draws, per-candidate
Monte Carlo batches, hyperparameter fitting restarts) each get their own
substream, keyed by a path of ints/strings, so results never depend on
evaluation order or parallel scheduling.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _key_to_int(part: int | str) -> int:
    if isinstance(part, bool):  # bools are ints; reject to avoid silent aliasing
        raise TypeError("bool is not a valid substream key part")
    if isinstance(part, int):
        if part < 0:
            raise ValueError(f"substream key ints must be nonnegative, got {part}")
        return part
    if isinstance(part, str):
        digest = hashlib.sha256(part.encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "big")
    raise TypeError(f"substream key parts must be int or str, got {type(part)!r}")


def substream_seed(master_seed: int, *key: int | str) -> int:
    """Stable 64-bit seed for the substream identified by ``key``.

    The mapping depends only on (master_seed, key), never on interpreter
    state, so any component that knows the master seed can reconstruct the
    exact random stream.
    """
    spawn_key = tuple(_key_to_int(p) for p in key)
    ss = np.random.SeedSequence(master_seed, spawn_key=spawn_key)
    return int(ss.generate_state(1, np.uint64)[0])


def substream(master_seed: int, *key: int | str) -> np.random.Generator:
    """Generator seeded for the substream identified by ``key``."""
    return np.random.default_rng(substream_seed(master_seed, *key))


def as_rng(seed: int | np.random.Generator) -> np.random.Generator:
    """Accept either a raw seed or an existing Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
