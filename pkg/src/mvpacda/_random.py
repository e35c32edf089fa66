"""Counter-based random streams.

Every random draw in the package comes from a Philox stream keyed by
``(seed, *task_ids)``; the i-th uniform of a stream depends only on the key
and on i, so generation order and thread scheduling never change results.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def derive_seed(seed: int, *task_ids: int) -> int:
    """Deterministic 64-bit child seed for a ``(seed, task id...)`` path."""
    ss = np.random.SeedSequence(entropy=int(seed) & _MASK64,
                                spawn_key=tuple(int(t) for t in task_ids))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def stream(seed: int, *task_ids: int) -> np.random.Generator:
    """Independent generator owned by one logical task."""
    key = derive_seed(seed, *task_ids)
    return np.random.Generator(np.random.Philox(key=key))


def categorical_draws(probs: np.ndarray, size: int, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF sampling of ``size`` indices from ``probs``."""
    cdf = np.cumsum(probs)
    u = rng.random(size) * cdf[-1]
    idx = np.searchsorted(cdf, u, side="right")
    # guard the u == cdf[-1] edge and zero-probability tails
    return np.minimum(idx, np.flatnonzero(probs > 0)[-1])
