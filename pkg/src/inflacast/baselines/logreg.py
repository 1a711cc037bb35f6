from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ._data import as_matrix, check_labels

logger = logging.getLogger(__name__)


def sigmoid(z: np.ndarray) -> np.ndarray:
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


@dataclass
class LogRegModel:
    weights: np.ndarray
    bias: float
    C: float = 1.0
    max_iter: int = 1000
    n_iter: int = 0
    converged: bool = False

    def __post_init__(self) -> None:
        if self.C <= 0:
            raise ValueError("C must be positive")

    @property
    def n_features(self) -> int:
        return len(self.weights)

    def decision_function(self, X) -> np.ndarray:
        X = as_matrix(X)
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        return np.asarray(X @ self.weights).ravel() + self.bias

    def predict_proba(self, X) -> np.ndarray:
        return sigmoid(self.decision_function(X))


def objective(w: np.ndarray, b: float, X, y: np.ndarray, C: float) -> float:
    """Summed log-loss plus ||w||^2 / (2C); the bias is not penalised."""
    z = np.asarray(X @ w).ravel() + b
    # log(1 + e^z) - y z, computed stably
    return float(np.sum(np.logaddexp(0.0, z) - y * z) + 0.5 / C * np.dot(w, w))


def gradient(w: np.ndarray, b: float, X, y: np.ndarray, C: float) -> tuple[np.ndarray, float]:
    r = sigmoid(np.asarray(X @ w).ravel() + b) - y
    return np.asarray(X.T @ r).ravel() + w / C, float(r.sum())


def train_logreg(X, y, C: float = 1.0, max_iter: int = 1000, tol: float = 1e-4) -> LogRegModel:
    """Full-batch gradient descent with Armijo backtracking.

    Stops when the gradient's max-norm drops to ``tol`` or after ``max_iter``
    iterations. Each iteration starts from twice the previous accepted step.
    """
    X = as_matrix(X)
    y = check_labels(y, X.shape[0], need_both=True).astype(float)
    if C <= 0:
        raise ValueError("C must be positive")
    w = np.zeros(X.shape[1])
    b = 0.0
    f = objective(w, b, X, y, C)
    step = 1.0
    n_iter = 0
    while True:
        gw, gb = gradient(w, b, X, y, C)
        converged = max(float(np.max(np.abs(gw), initial=0.0)), abs(gb)) <= tol
        if converged or n_iter >= max_iter:
            break
        gnorm2 = float(np.dot(gw, gw) + gb * gb)
        step *= 2.0
        while True:
            w_new, b_new = w - step * gw, b - step * gb
            f_new = objective(w_new, b_new, X, y, C)
            if f_new <= f - 0.5 * step * gnorm2 or step < 1e-16:
                break
            step *= 0.5
        w, b, f = w_new, b_new, f_new
        n_iter += 1
    if not converged:
        logger.info("logistic regression stopped at max_iter=%d before reaching tol=%g", max_iter, tol)
    return LogRegModel(weights=w, bias=b, C=C, max_iter=max_iter, n_iter=n_iter, converged=converged)


def training_loss(model: LogRegModel, X, y) -> float:
    X = as_matrix(X)
    return objective(model.weights, model.bias, X, np.asarray(y, dtype=float), model.C)
