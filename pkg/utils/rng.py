"""Labelled random streams.

One master seed, streams derived by stable labels (construction name plus level or
replica index). The same label always yields the same stream, regardless of the order
in which streams are requested or how many workers consume them.
"""

import hashlib
from typing import Union

import numpy as np

SeedLike = Union[int, np.random.SeedSequence]


def _label_words(label: str) -> list:
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return [int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4)]


def seed_sequence(seed: int, *labels) -> np.random.SeedSequence:
    """SeedSequence for `seed` specialised by the given labels."""
    if seed is None:
        raise ValueError("seed is mandatory for randomized constructions")
    words = [int(seed) & 0xFFFFFFFF, (int(seed) >> 32) & 0xFFFFFFFF]
    for label in labels:
        words.extend(_label_words(str(label)))
    return np.random.SeedSequence(words)


def make_rng(seed: int, *labels) -> np.random.Generator:
    """Generator for the labelled stream."""
    return np.random.default_rng(seed_sequence(seed, *labels))


def derive_seed(seed: int, *labels) -> int:
    """64-bit integer seed for the labelled stream, suitable for reports."""
    return int(seed_sequence(seed, *labels).generate_state(1, dtype=np.uint64)[0])
