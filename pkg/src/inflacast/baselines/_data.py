from __future__ import annotations

import os
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from ..vectorizer import SparseVector, to_csr


class TrainingError(ValueError):
    pass


def as_matrix(X) -> sp.csr_matrix | np.ndarray:
    """Accept a list of SparseVector, a scipy sparse matrix or a dense array."""
    if isinstance(X, np.ndarray):
        return X.astype(float, copy=False)
    if sp.issparse(X):
        return sp.csr_matrix(X, dtype=float)
    X = list(X)
    if X and isinstance(X[0], SparseVector):
        return to_csr(X, X[0].dim)
    return np.asarray(X, dtype=float)


def dense_rows(X, rows: np.ndarray | slice | None = None, cols: np.ndarray | None = None) -> np.ndarray:
    sub = X if rows is None else X[rows]
    if cols is not None:
        sub = sub[:, cols]
    if sp.issparse(sub):
        return sub.toarray()
    return np.asarray(sub, dtype=float)


def check_labels(y: Sequence[int], n: int, *, need_both: bool) -> np.ndarray:
    y = np.asarray(y)
    if y.shape != (n,):
        raise TrainingError(f"expected {n} labels, got shape {y.shape}")
    if not np.isin(y, (0, 1)).all():
        raise TrainingError("labels must be 0 or 1")
    if n == 0:
        raise TrainingError("no training examples")
    if need_both and len(np.unique(y)) < 2:
        raise TrainingError("both classes must be present in the training data")
    return y.astype(np.int64)


def n_workers() -> int:
    env = os.environ.get("INFLACAST_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1
