from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from ..evalkit import macro_f1, stratified_folds
from ._data import as_matrix, n_workers


class FoldError(ValueError):
    pass


@dataclass(frozen=True)
class GridResult:
    best_params: dict[str, Any]
    fold_scores: list[tuple[dict[str, Any], list[float]]]

    def mean_scores(self) -> list[tuple[dict[str, Any], float]]:
        return [(p, float(np.mean(s))) for p, s in self.fold_scores]


def expand_grid(grid: Mapping[str, Sequence[Any]]) -> list[dict[str, Any]]:
    if not grid:
        raise ValueError("grid must not be empty")
    keys = list(grid)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


def grid_search(
    trainer: Callable[..., Any],
    grid: Mapping[str, Sequence[Any]],
    X,
    y,
    k_folds: int = 5,
    seed: int = 0,
) -> GridResult:
    """Stratified k-fold macro-F1 search; first-listed cell wins ties.

    ``trainer(X, y, **params)`` must return a model with ``predict_proba``.
    """
    X = as_matrix(X)
    y = np.asarray(y)
    folds = stratified_folds(y, k_folds, seed)
    for i, test_idx in enumerate(folds):
        train_mask = np.ones(len(y), dtype=bool)
        train_mask[test_idx] = False
        if len(np.unique(y[test_idx])) < 2 or len(np.unique(y[train_mask])) < 2:
            raise FoldError(
                f"fold {i} holds a single class; use fewer folds or more data per class"
            )
    cells = expand_grid(grid)

    def run(params: dict[str, Any]) -> list[float]:
        scores = []
        for test_idx in folds:
            train_mask = np.ones(len(y), dtype=bool)
            train_mask[test_idx] = False
            model = trainer(X[train_mask], y[train_mask], **params)
            pred = (model.predict_proba(X[test_idx]) >= 0.5).astype(int)
            scores.append(macro_f1(y[test_idx], pred))
        return scores

    workers = min(n_workers(), len(cells))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            all_scores = list(pool.map(run, cells))
    else:
        all_scores = [run(c) for c in cells]

    best_i = 0
    best_mean = -np.inf
    for i, s in enumerate(all_scores):
        m = float(np.mean(s))
        if m > best_mean:
            best_i, best_mean = i, m
    return GridResult(best_params=dict(cells[best_i]), fold_scores=list(zip(cells, all_scores)))
