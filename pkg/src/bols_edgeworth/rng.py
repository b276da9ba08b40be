"""Counter-based random streams.

Every stream is a Philox generator keyed by ``(seed, *key)`` through
:class:`numpy.random.SeedSequence`, so the draws of one stream never depend
on how many other streams exist or in which order they are consumed.
"""

import zlib

import numpy as np

_TAGS = {}


def _tag(name):
    if name not in _TAGS:
        _TAGS[name] = zlib.crc32(name.encode("utf-8"))
    return _TAGS[name]


def stream(seed, *key):
    """Return an independent generator for ``(seed, *key)``.

    String components of ``key`` are hashed to stable 32-bit integers.
    """
    parts = tuple(_tag(k) if isinstance(k, str) else int(k) for k in key)
    ss = np.random.SeedSequence(int(seed), spawn_key=parts)
    return np.random.Generator(np.random.Philox(ss))
