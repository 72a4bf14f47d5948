"""Input validation helpers for the estimator layer.

These raise plain ValueError so the estimators behave like other
scikit-learn components under bad input.
"""

from __future__ import annotations

import numpy as np


def check_feature_matrix(X, expected_dim: int | None = None) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
        raise ValueError(f"X must be a non-empty 2-D array, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("X contains NaN or infinite values")
    if expected_dim is not None and X.shape[1] != expected_dim:
        raise ValueError(f"X has {X.shape[1]} features, expected {expected_dim}")
    return X


def check_labels(y, n_rows: int) -> list[str]:
    labels = [str(v) for v in np.asarray(y).ravel()]
    if len(labels) != n_rows:
        raise ValueError(f"y has {len(labels)} entries for {n_rows} rows of X")
    return labels


def check_contexts(contexts, n_rows: int) -> list[tuple[str, ...]]:
    if contexts is None:
        return [() for _ in range(n_rows)]
    out = [tuple(str(l) for l in ctx) for ctx in contexts]
    if len(out) != n_rows:
        raise ValueError(f"contexts has {len(out)} entries for {n_rows} rows of X")
    return out


def check_sizes(sizes, n_rows: int) -> list[float | None]:
    if sizes is None:
        return [None] * n_rows
    out = [None if s is None else float(s) for s in np.asarray(sizes, dtype=object).ravel()]
    if len(out) != n_rows:
        raise ValueError(f"sizes has {len(out)} entries for {n_rows} rows of X")
    return out
