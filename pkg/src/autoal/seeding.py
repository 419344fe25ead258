"""Deterministic sub-seed derivation so that independent consumers of one
run seed never share a random stream."""

import zlib

import numpy as np


def derive_seed(seed, *tags):
    words = [int(seed) & 0xFFFFFFFF]
    for tag in tags:
        if isinstance(tag, (int, np.integer)):
            words.append(int(tag) & 0xFFFFFFFF)
        else:
            words.append(zlib.crc32(str(tag).encode()))
    return int(np.random.SeedSequence(words).generate_state(1)[0])


def derive_rng(seed, *tags):
    return np.random.default_rng(derive_seed(seed, *tags))
