"""From-scratch benchmark classifiers over TF-IDF vectors."""

from __future__ import annotations

from ..vectorizer import SparseVector
from ._data import TrainingError, as_matrix
from .forest import ForestModel, oob_accuracy, train_forest
from .gbm import GbmModel, train_gbm
from .logreg import LogRegModel, train_logreg
from .persist import load_model, save_model
from .search import FoldError, GridResult, grid_search
from .tree import TreeModel, train_tree

TRAINERS = {
    "logreg": train_logreg,
    "tree": train_tree,
    "forest": train_forest,
    "gbm": train_gbm,
}

# hyperparameters reported for each benchmark; everything else is a local default
REPORTED_PARAMS = {
    "logreg": {"C": 1.0, "max_iter": 1000},
    "tree": {"max_depth": 10},
    "forest": {"max_depth": 10},
    "gbm": {"learning_rate": 0.05, "n_estimators": 200},
}


def predict_proba(model, x: SparseVector) -> float:
    """Class-1 probability for a single vector."""
    if x.dim != model.n_features:
        raise ValueError(f"vector dimension {x.dim} != model dimension {model.n_features}")
    return float(model.predict_proba(as_matrix([x]))[0])


def predict(model, x: SparseVector) -> int:
    return int(predict_proba(model, x) >= 0.5)


__all__ = [
    "ForestModel", "FoldError", "GbmModel", "GridResult", "LogRegModel", "REPORTED_PARAMS",
    "TRAINERS", "TrainingError", "TreeModel", "grid_search", "load_model", "oob_accuracy",
    "predict", "predict_proba", "save_model", "train_forest", "train_gbm", "train_logreg",
    "train_tree",
]
