"""Counter-based random streams.

Every randomized routine derives its generator from a root seed plus a tuple
of integer stream identifiers (replication index, node id, outer-point index,
...).  Streams are independent Philox generators, so results do not depend on
the order in which concurrent tasks happen to run.
"""

from __future__ import annotations

import numpy as np


def stream_rng(seed: int, *stream: int) -> np.random.Generator:
    """Generator for the (seed, *stream) stream, independent of call order."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *[int(s) for s in stream]])
    return np.random.Generator(np.random.Philox(ss))
