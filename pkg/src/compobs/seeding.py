"""Seed hierarchy for reproducible Monte-Carlo runs.

Every random draw in the package comes from a ``numpy.random.Generator``
whose seed is derived from a master seed by repeated SplitMix64 mixing::

    trial_seed = derive_seed(master_seed, "trial", M, trial_index)
    block_seed = derive_seed(trial_seed, "block", i)

The mixing function is the SplitMix64 finalizer (Steele, Lea & Flood 2014):

    z = (z + 0x9E3779B97F4A7C15) mod 2**64
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 mod 2**64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB mod 2**64
    z = z ^ (z >> 31)

String keys are folded in through their UTF-8 bytes so that seeds can be
reproduced from any language with 64-bit unsigned arithmetic.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(state: int) -> int:
    """One SplitMix64 step: advance ``state`` and return the mixed output."""
    z = (state + GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def _key_words(key) -> list[int]:
    if isinstance(key, (bool, np.bool_)):
        return [int(key)]
    if isinstance(key, (int, np.integer)):
        return [int(key) & MASK64]
    if isinstance(key, str):
        data = key.encode("utf-8")
        # length prefix keeps "ab","c" distinct from "a","bc"
        words = [len(data)]
        for i in range(0, len(data), 8):
            words.append(int.from_bytes(data[i : i + 8], "little"))
        return words
    raise TypeError(f"unsupported seed key type: {type(key).__name__}")


def derive_seed(parent: int, *keys) -> int:
    """Derive a child seed from ``parent`` and a path of int/str keys."""
    h = splitmix64(int(parent) & MASK64)
    for key in keys:
        for word in _key_words(key):
            h = splitmix64(h ^ word)
    return h


def make_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.PCG64(int(seed) & MASK64))
