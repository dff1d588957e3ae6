"""Seed expansion.

Every random stream is derived from one user seed plus a tuple of stream
keys through :class:`numpy.random.SeedSequence`, so components never share
state and a run can be replayed from the seed alone.
"""

import zlib

import numpy as np


def _key(part):
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    return int(part)


def make_rng(seed, *stream):
    """Return a Generator for ``seed`` and a named sub-stream.

    >>> a = make_rng(7, "search", 0).random()
    >>> b = make_rng(7, "search", 0).random()
    >>> a == b
    True
    """
    if isinstance(seed, np.random.Generator):
        if stream:
            raise TypeError("cannot derive a named stream from a Generator")
        return seed
    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(_key(p) for p in stream))
    return np.random.default_rng(seq)


def as_rng(rng_or_seed):
    """Accept a Generator, an int seed or None."""
    if isinstance(rng_or_seed, np.random.Generator):
        return rng_or_seed
    return np.random.default_rng(rng_or_seed)
