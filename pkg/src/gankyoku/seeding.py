"""Labeled RNG streams derived from one global seed.

Every randomized subsystem asks for its own stream by purpose label, so
adding a new consumer never shifts the draws seen by existing ones.
"""

import hashlib

import numpy as np


def stream_key(label: str) -> list[int]:
    """Stable 128-bit entropy words for a purpose label."""
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]


def rng_for(seed: int, label: str) -> np.random.Generator:
    """Independent generator for (seed, label), reproducible across runs."""
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    return np.random.default_rng(np.random.SeedSequence([seed, *stream_key(label)]))
