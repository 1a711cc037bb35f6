from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._data import as_matrix, check_labels, n_workers
from .tree import TreeModel, grow


@dataclass
class ForestModel:
    trees: list[TreeModel]
    seeds: list[int]
    max_features: int
    max_depth: int
    bootstrap: bool = True
    # in-bag sample indices per tree; kept for out-of-bag scoring, not persisted
    in_bag: list[np.ndarray] = field(default_factory=list, repr=False, compare=False)

    @property
    def n_features(self) -> int:
        return self.trees[0].n_features

    def predict_proba(self, X) -> np.ndarray:
        X = as_matrix(X)
        return np.mean([t.predict_proba(X) for t in self.trees], axis=0)


def _fit_one(X, y, tree_seed: int, n: int, max_depth: int, min_leaf: int, max_features: int, bootstrap: bool):
    rng = np.random.default_rng(tree_seed)
    idx = rng.integers(0, n, size=n) if bootstrap else np.arange(n)
    n_features = X.shape[1]
    sampler = None
    if max_features < n_features:
        def sampler(F: int) -> np.ndarray:
            return rng.choice(F, size=max_features, replace=False)
    tree = grow(X, y, criterion="gini", max_depth=max_depth, min_leaf=min_leaf,
                sample_idx=idx, feature_sampler=sampler)
    return tree, idx


def train_forest(
    X,
    y,
    n_trees: int = 100,
    max_depth: int = 10,
    seed: int = 0,
    min_leaf: int = 1,
    max_features: int | None = None,
    bootstrap: bool = True,
) -> ForestModel:
    """Bagged Gini trees with a fresh random feature subset at every split.

    ``max_features`` defaults to ``floor(sqrt(n_features))``. Tree ``i`` draws
    from its own generator seeded by ``(seed, i)``, so the model does not
    depend on how the trees are scheduled across threads.
    """
    X = as_matrix(X)
    y = check_labels(y, X.shape[0], need_both=False)
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    n, F = X.shape
    if max_features is None:
        max_features = max(1, int(math.sqrt(F)))
    max_features = min(max_features, F)
    seeds = [int(np.random.SeedSequence([seed, i]).generate_state(1)[0]) for i in range(n_trees)]

    def job(s: int):
        return _fit_one(X, y, s, n, max_depth, min_leaf, max_features, bootstrap)

    workers = min(n_workers(), n_trees)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, seeds))
    else:
        results = [job(s) for s in seeds]
    return ForestModel(
        trees=[r[0] for r in results],
        seeds=seeds,
        max_features=max_features,
        max_depth=max_depth,
        bootstrap=bootstrap,
        in_bag=[r[1] for r in results],
    )


def oob_accuracy(forest: ForestModel, X, y) -> float:
    """Accuracy of out-of-bag votes over samples left out by at least one tree."""
    X = as_matrix(X)
    y = np.asarray(y)
    n = X.shape[0]
    total = np.zeros(n)
    votes = np.zeros(n)
    for tree, idx in zip(forest.trees, forest.in_bag):
        oob = np.ones(n, dtype=bool)
        oob[idx] = False
        if oob.any():
            total[oob] += tree.predict_proba(X[oob])
            votes[oob] += 1
    has = votes > 0
    if not has.any():
        raise ValueError("no out-of-bag samples")
    pred = (total[has] / votes[has]) >= 0.5
    return float(np.mean(pred == y[has]))
