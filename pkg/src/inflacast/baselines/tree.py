"""Greedy CART trees over TF-IDF features.

Split candidates for a feature are the midpoints between consecutive
distinct values seen at the node, plus 0.0 wherever zero separates two of
them (sparse rows are mostly zeros). Samples with ``x <= threshold`` go left.
Among splits of equal quality the lowest feature index wins, then the lowest
threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._data import as_matrix, check_labels, dense_rows

LEAF = -1
_TIE_TOL = 1e-9


@dataclass
class TreeModel:
    feature: np.ndarray  # LEAF for leaves
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # class-1 probability, or regression output
    n_samples: np.ndarray
    n_features: int
    max_depth: int
    kind: str = "classifier"
    depth: int = field(default=0)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def leaf_probabilities(self) -> np.ndarray:
        """(p0, p1) per node; meaningful for classifier trees."""
        return np.stack([1.0 - self.value, self.value], axis=1)

    def apply(self, X) -> np.ndarray:
        X = as_matrix(X)
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        n = X.shape[0]
        out = np.empty(n, dtype=np.int64)
        for start in range(0, n, 1024):
            rows = dense_rows(X, slice(start, start + 1024))
            node = np.zeros(len(rows), dtype=np.int64)
            r = np.arange(len(rows))
            for _ in range(self.depth + 1):
                f = self.feature[node]
                inner = f != LEAF
                if not inner.any():
                    break
                go_left = rows[r, np.where(inner, f, 0)] <= self.threshold[node]
                node = np.where(inner, np.where(go_left, self.left[node], self.right[node]), node)
            out[start:start + len(rows)] = node
        return out

    def predict_value(self, X) -> np.ndarray:
        return self.value[self.apply(X)]

    def predict_proba(self, X) -> np.ndarray:
        return self.predict_value(X)


def candidate_splits(x: np.ndarray, t: np.ndarray, criterion: str, min_leaf: int):
    """Score every candidate split of one node on every column.

    ``x`` is (n, F), ``t`` the targets. Returns (quality, threshold), each (n-1, F);
    quality is the quantity to maximise (+inf-free, -inf where invalid).
    """
    n, F = x.shape
    order = np.argsort(x, axis=0, kind="stable")
    xs = np.take_along_axis(x, order, axis=0)
    ts = t[order]
    n_left = np.arange(1, n, dtype=float)[:, None]
    n_right = n - n_left
    if criterion == "gini":
        l1 = np.cumsum(ts, axis=0)[:-1]
        tot1 = ts.sum(axis=0)
        l0 = n_left - l1
        r1 = tot1 - l1
        r0 = n_right - r1
        quality = (l1 ** 2 + l0 ** 2) / n_left + (r1 ** 2 + r0 ** 2) / n_right
    elif criterion == "mse":
        ls = np.cumsum(ts, axis=0)[:-1]
        rs = ts.sum(axis=0) - ls
        quality = ls ** 2 / n_left + rs ** 2 / n_right
    else:
        raise ValueError(f"unknown criterion {criterion!r}")
    a, b = xs[:-1], xs[1:]
    valid = (a < b) & (n_left >= min_leaf) & (n_right >= min_leaf)
    mid = (a + b) / 2.0
    thr = np.where((a <= 0.0) & (b > 0.0), np.minimum(mid, 0.0), mid)
    quality = np.where(valid, quality, -np.inf)
    return quality, thr


def best_split(x: np.ndarray, t: np.ndarray, features: np.ndarray, criterion: str, min_leaf: int):
    """Return (feature, threshold) of the best split or None. ``features`` sorted ascending."""
    if x.shape[0] < 2:
        return None
    quality, thr = candidate_splits(x, t, criterion, min_leaf)
    best = quality.max()
    if not np.isfinite(best):
        return None
    tol = _TIE_TOL * max(1.0, abs(best))
    cand = np.argwhere(quality >= best - tol)
    # lowest feature index, then lowest threshold
    cols = cand[:, 1]
    col = cols.min()
    rows = cand[cols == col, 0]
    return int(features[col]), float(thr[rows, col].min())


FeatureSampler = Callable[[int], np.ndarray]


def grow(
    X,
    t: np.ndarray,
    *,
    criterion: str,
    max_depth: int,
    min_leaf: int = 1,
    sample_idx: np.ndarray | None = None,
    feature_sampler: FeatureSampler | None = None,
    leaf_value: Callable[[np.ndarray], float] | None = None,
) -> TreeModel:
    """Grow a tree depth-first. ``sample_idx`` may repeat rows (bootstrap)."""
    X = as_matrix(X)
    n_total, n_features = X.shape
    t = np.asarray(t, dtype=float)
    idx0 = np.arange(n_total) if sample_idx is None else np.asarray(sample_idx)
    if leaf_value is None:
        def leaf_value(rows: np.ndarray) -> float:
            return float(t[rows].mean())

    feature, threshold, left, right, value, counts = [], [], [], [], [], []
    max_seen = 0

    def new_node() -> int:
        for arr, v in ((feature, LEAF), (threshold, 0.0), (left, LEAF), (right, LEAF), (value, 0.0), (counts, 0)):
            arr.append(v)
        return len(feature) - 1

    stack = [(new_node(), idx0, 0)]
    while stack:
        node, idx, depth = stack.pop()
        max_seen = max(max_seen, depth)
        ti = t[idx]
        value[node] = leaf_value(idx)
        counts[node] = len(idx)
        pure = np.all(ti == ti[0])
        if depth >= max_depth or pure or len(idx) < 2 * min_leaf:
            continue
        feats = np.arange(n_features) if feature_sampler is None else np.sort(feature_sampler(n_features))
        xs = dense_rows(X, idx, feats)
        split = best_split(xs, ti, feats, criterion, min_leaf)
        if split is None:
            continue
        f, thr = split
        col = xs[:, np.searchsorted(feats, f)]
        go_left = col <= thr
        li, ri = new_node(), new_node()
        feature[node], threshold[node], left[node], right[node] = f, thr, li, ri
        # push right first so the left subtree is numbered first
        stack.append((ri, idx[~go_left], depth + 1))
        stack.append((li, idx[go_left], depth + 1))

    return TreeModel(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold, dtype=float),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        value=np.array(value, dtype=float),
        n_samples=np.array(counts, dtype=np.int64),
        n_features=n_features,
        max_depth=max_depth,
        kind="classifier" if criterion == "gini" else "regressor",
        depth=max_seen,
    )


def train_tree(X, y, max_depth: int = 10, min_leaf: int = 1) -> TreeModel:
    """Gini CART classifier. Single-class data gives a one-leaf tree."""
    X = as_matrix(X)
    y = check_labels(y, X.shape[0], need_both=False)
    return grow(X, y, criterion="gini", max_depth=max_depth, min_leaf=min_leaf)
