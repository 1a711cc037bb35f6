from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._data import as_matrix, check_labels
from .logreg import sigmoid
from .tree import LEAF, TreeModel, grow


@dataclass
class GbmModel:
    init_logit: float
    trees: list[TreeModel]
    learning_rate: float
    n_estimators: int
    max_depth: int = 3
    n_features: int = 0
    # training log-loss after each stage (index 0 = initial model); not persisted
    train_loss: list[float] = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")

    def decision_function(self, X) -> np.ndarray:
        X = as_matrix(X)
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        f = np.full(X.shape[0], self.init_logit)
        for tree in self.trees:
            f += tree.predict_value(X)
        return f

    def staged_decision_function(self, X):
        X = as_matrix(X)
        f = np.full(X.shape[0], self.init_logit)
        yield f.copy()
        for tree in self.trees:
            f += tree.predict_value(X)
            yield f.copy()

    def predict_proba(self, X) -> np.ndarray:
        return sigmoid(self.decision_function(X))


def log_loss(y: np.ndarray, logit: np.ndarray) -> float:
    """Mean binary cross-entropy from logits."""
    return float(np.mean(np.logaddexp(0.0, logit) - y * logit))


def _leaf_step(y: np.ndarray, f: np.ndarray, learning_rate: float) -> float:
    """Shrunken Newton step for one leaf, halved until the leaf's loss does not rise."""
    p = sigmoid(f)
    g = float(np.sum(y - p))
    h = float(np.sum(p * (1.0 - p)))
    if g == 0.0:
        return 0.0
    step = learning_rate * g / max(h, 1e-12)
    base = np.sum(np.logaddexp(0.0, f) - y * f)
    for _ in range(60):
        fs = f + step
        if np.sum(np.logaddexp(0.0, fs) - y * fs) <= base:
            return step
        step *= 0.5
    return 0.0


def train_gbm(
    X,
    y,
    n_estimators: int = 200,
    learning_rate: float = 0.05,
    max_depth: int = 3,
    min_leaf: int = 1,
) -> GbmModel:
    """Log-loss gradient boosting.

    Starts from the log-odds of the positive rate; each stage fits a
    variance-reduction tree to the residuals ``y - p`` and sets each leaf to a
    Newton step scaled by ``learning_rate``. A step that would raise the
    leaf's loss is halved, so training loss never increases between stages.
    """
    X = as_matrix(X)
    y = check_labels(y, X.shape[0], need_both=True).astype(float)
    if learning_rate < 0:
        raise ValueError("learning_rate must be non-negative")
    rate = y.mean()
    init = float(np.log(rate / (1.0 - rate)))
    f = np.full(len(y), init)
    trees: list[TreeModel] = []
    losses = [log_loss(y, f)]
    for _ in range(n_estimators):
        resid = y - sigmoid(f)
        tree = grow(X, resid, criterion="mse", max_depth=max_depth, min_leaf=min_leaf)
        leaves = tree.apply(X)
        values = np.zeros(tree.n_nodes)
        for leaf in np.flatnonzero(tree.feature == LEAF):
            members = leaves == leaf
            if members.any():
                values[leaf] = _leaf_step(y[members], f[members], learning_rate)
        tree.value = values
        f = f + values[leaves]
        trees.append(tree)
        losses.append(log_loss(y, f))
    return GbmModel(
        init_logit=init,
        trees=trees,
        learning_rate=learning_rate,
        n_estimators=n_estimators,
        max_depth=max_depth,
        n_features=X.shape[1],
        train_loss=losses,
    )
