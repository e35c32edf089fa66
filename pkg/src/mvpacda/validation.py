"""Input checks for multi-view arrays and binary labels."""

from __future__ import annotations

import numpy as np
from sklearn.utils import check_array


def check_Xs(Xs, n_views: int | None = None, dims=None) -> list[np.ndarray]:
    """Validate a list of per-view ``(n_samples, n_features_v)`` arrays."""
    if isinstance(Xs, np.ndarray) and Xs.ndim == 2:
        Xs = [Xs]
    Xs = [check_array(X, dtype=float, ensure_2d=True) for X in Xs]
    if not Xs:
        raise ValueError("Xs must contain at least one view")
    if n_views is not None and len(Xs) != n_views:
        raise ValueError(f"expected {n_views} views, got {len(Xs)}")
    n = {X.shape[0] for X in Xs}
    if len(n) != 1:
        raise ValueError(f"views disagree on the number of samples: {sorted(n)}")
    if dims is not None:
        got = tuple(X.shape[1] for X in Xs)
        if got != tuple(dims):
            raise ValueError(f"expected view dimensions {tuple(dims)}, got {got}")
    return Xs


def check_binary_labels(y, n_samples: int) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(classes, y_pm)`` where ``y_pm`` maps ``classes[1]`` to +1 and ``classes[0]`` to -1."""
    y = np.asarray(y).reshape(-1)
    if y.size != n_samples:
        raise ValueError(f"y has {y.size} entries for {n_samples} samples")
    classes = np.unique(y)
    if classes.size != 2:
        raise ValueError(f"expected exactly two classes, got {classes.size}")
    return classes, np.where(y == classes[1], 1, -1)
