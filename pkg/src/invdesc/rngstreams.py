"""Counter-based random streams for reproducible, order-independent trials.

Each trial draws from its own Philox stream keyed by ``(seed, stream)``, so
results are byte-identical no matter how trials are scheduled across
workers.
"""

from __future__ import annotations

import numpy as np

__all__ = ["stream_rng"]


def stream_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Return the generator for one ``(seed, stream)`` pair."""
    if seed < 0 or stream < 0:
        raise ValueError("seed and stream must be nonnegative")
    key = (int(seed) << 64) | int(stream)
    return np.random.Generator(np.random.Philox(key=key))
