"""
Seeding Utilities
Deterministic derivation of independent random streams
"""
from typing import Union

from numpy.random import PCG64, Generator, SeedSequence

# Purpose keys keep streams for different jobs disjoint even with equal seeds
STREAM_SEARCH = 1
STREAM_SPLIT = 2
STREAM_VERIFY = 3
STREAM_PROBE = 4
STREAM_SIMULATE = 5

SeedLike = Union[int, SeedSequence]


def derive_seed(seed: SeedLike, *key: int) -> SeedSequence:
    """Derive a child SeedSequence addressed by an integer key path"""
    if isinstance(seed, SeedSequence):
        return SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + tuple(key))
    return SeedSequence(seed, spawn_key=tuple(key))


def make_rng(seed: SeedLike, *key: int) -> Generator:
    """Generator for the stream addressed by (seed, *key)"""
    return Generator(PCG64(derive_seed(seed, *key)))
