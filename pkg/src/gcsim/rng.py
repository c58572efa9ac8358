"""Seeded, counter-based random substreams.

Every stochastic stage draws from its own named substream so that changing
one stage (say, detector jitter) never perturbs the numbers another stage
sees. Substreams are Philox generators keyed by ``(seed, crc32(name))``.
"""

import zlib

import numpy as np

PS_PER_S = 1_000_000_000_000

#: Substream names used by the pipelines.
EMISSION = "emission"
FREQUENCY = "frequency"
ROUTING = "routing"
DETECTION = "detection"
DARK = "dark"


def substream(seed, name, *index):
    """Return an independent ``numpy.random.Generator`` for ``name``.

    Extra integer ``index`` values split a named stream further, e.g. one
    substream per detector channel.
    """
    if seed is None:
        raise ValueError("a seed is required for reproducible substreams")
    key = (zlib.crc32(name.encode("utf-8")),) + tuple(int(i) for i in index)
    ss = np.random.SeedSequence(int(seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))


def as_generator(rng):
    """Accept a Generator, an int seed, or None."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.Generator(np.random.Philox(rng))


def to_ps(seconds):
    """Round times in seconds to integer picoseconds, half-to-even."""
    return np.rint(np.asarray(seconds, dtype=np.float64) * PS_PER_S).astype(np.int64)
