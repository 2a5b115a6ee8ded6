"""Seeded random streams.

All randomness goes through numpy's PCG64 bit generator, whose output for a
given seed is platform independent. Independent streams are derived from a
root seed plus an integer key path, e.g. ``(epoch, sample_index)``.
"""

from __future__ import annotations

import numpy as np

ALGORITHM = "PCG64"


def make_rng(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def rng_state(rng: np.random.Generator) -> dict:
    return rng.bit_generator.state


def restore_rng(state: dict) -> np.random.Generator:
    if state.get("bit_generator") != ALGORITHM:
        raise ValueError(f"unsupported bit generator {state.get('bit_generator')!r}")
    bg = np.random.PCG64()
    bg.state = state
    return np.random.Generator(bg)
