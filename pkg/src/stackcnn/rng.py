"""Seeded random streams.

Every random draw in the package (weight init, dropout masks, shuffles, fold
assignment, configuration sampling) goes through a ``numpy.random.Generator``
built on PCG64, whose output is fixed for a given seed on every platform.
Sub-seeds are derived from one master seed with a splitmix64 mix so any
component can be re-run on its own.
"""

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1


def splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def _key_to_int(key):
    if isinstance(key, (int, np.integer)):
        return int(key) & MASK64
    digest = hashlib.blake2b(str(key).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def derive_seed(master, *keys):
    """Derive a 64-bit sub-seed from ``master`` and a path of int/str keys.

    >>> derive_seed(7, "model", 0, 1) == derive_seed(7, "model", 0, 1)
    True
    """
    x = splitmix64(int(master) & MASK64)
    for key in keys:
        x = splitmix64(x ^ _key_to_int(key))
    return x


def make_rng(seed):
    """Generator for a 64-bit seed; identical draws for identical seeds."""
    return np.random.Generator(np.random.PCG64(int(seed) & MASK64))
