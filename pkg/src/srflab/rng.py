"""Counter-based random streams for reproducible parallel ensembles.

Every stream is keyed by (global seed, stream labels...) through numpy's
SeedSequence spawn keys on top of the Philox counter-based generator, so
replicas can be generated in any order, on any worker, with identical output.
"""

from __future__ import annotations

import numpy as np


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for (seed, key).  Same arguments, same bits."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))
