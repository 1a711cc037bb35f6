"""Dataset splitting and confusion-count metrics."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class SplitError(ValueError):
    pass


@dataclass(frozen=True)
class DatasetSplit:
    train: np.ndarray
    validation: np.ndarray
    test: np.ndarray
    seed: int

    def sizes(self) -> tuple[int, int, int]:
        return len(self.train), len(self.validation), len(self.test)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split(labels: Sequence[int], seed: int = 0, test_frac: float = 0.2, val_frac_of_train: float = 0.25,
          min_per_class: int = 5) -> DatasetSplit:
    """Stratified train/validation/test split.

    Per class, ``test_frac`` of the examples (rounded half up) go to test;
    ``val_frac_of_train`` of what remains goes to validation; the rest is
    training data. With the defaults this is 60/20/20.
    """
    y = np.asarray(labels)
    rng = np.random.default_rng(seed)
    train, val, test = [], [], []
    for c in np.unique(y):
        idx = np.flatnonzero(y == c)
        if len(idx) < min_per_class:
            raise SplitError(f"class {c} has {len(idx)} examples; need at least {min_per_class}")
        idx = rng.permutation(idx)
        n_test = _round_half_up(test_frac * len(idx))
        n_val = _round_half_up(val_frac_of_train * (len(idx) - n_test))
        test.append(idx[:n_test])
        val.append(idx[n_test:n_test + n_val])
        train.append(idx[n_test + n_val:])
    return DatasetSplit(
        train=np.sort(np.concatenate(train)),
        validation=np.sort(np.concatenate(val)),
        test=np.sort(np.concatenate(test)),
        seed=seed,
    )


def stratified_folds(labels: Sequence[int], k: int, seed: int = 0) -> list[np.ndarray]:
    """Assign indices to ``k`` folds, dealing each shuffled class round-robin."""
    if k < 2:
        raise ValueError("k_folds must be >= 2")
    y = np.asarray(labels)
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    offset = 0
    for c in np.unique(y):
        idx = rng.permutation(np.flatnonzero(y == c))
        for j, i in enumerate(idx):
            folds[(j + offset) % k].append(int(i))
        offset += len(idx)
    return [np.array(sorted(f), dtype=int) for f in folds]


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def swapped(self) -> "ConfusionMatrix":
        """Counts with class 0 taken as the positive class."""
        return ConfusionMatrix(tp=self.tn, fp=self.fn, fn=self.fp, tn=self.tp)


def confusion(y_true: Sequence[int], y_pred: Sequence[int]) -> ConfusionMatrix:
    t = np.asarray(y_true)
    p = np.asarray(y_pred)
    if t.shape != p.shape:
        raise ValueError(f"length mismatch: {t.shape} vs {p.shape}")
    if not (np.isin(t, (0, 1)).all() and np.isin(p, (0, 1)).all()):
        raise ValueError("labels must be 0 or 1")
    return ConfusionMatrix(
        tp=int(np.sum((t == 1) & (p == 1))),
        fp=int(np.sum((t == 0) & (p == 1))),
        fn=int(np.sum((t == 1) & (p == 0))),
        tn=int(np.sum((t == 0) & (p == 0))),
    )


@dataclass(frozen=True)
class ClassScores:
    precision: float
    recall: float
    f1: float
    degenerate: bool


def _ratio(num: int, den: int) -> tuple[float, bool]:
    return (num / den, False) if den else (0.0, True)


def class_scores(cm: ConfusionMatrix) -> ClassScores:
    precision, d1 = _ratio(cm.tp, cm.tp + cm.fp)
    recall, d2 = _ratio(cm.tp, cm.tp + cm.fn)
    f1, d3 = _ratio(2 * cm.tp, 2 * cm.tp + cm.fp + cm.fn)
    return ClassScores(precision, recall, f1, d1 or d2 or d3)


def harmonic_f1(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class MetricsReport:
    per_class: dict[int, ClassScores]
    precision: float
    recall: float
    f1: float

    @property
    def degenerate(self) -> bool:
        return any(s.degenerate for s in self.per_class.values())


def metrics(cm: ConfusionMatrix) -> MetricsReport:
    """Per-class precision/recall/F1 and their unweighted (macro) means.

    A zero denominator yields 0 and sets the degenerate flag.
    """
    pos = class_scores(cm)
    neg = class_scores(cm.swapped())
    return MetricsReport(
        per_class={1: pos, 0: neg},
        precision=(pos.precision + neg.precision) / 2,
        recall=(pos.recall + neg.recall) / 2,
        f1=(pos.f1 + neg.f1) / 2,
    )


def macro_f1(y_true: Sequence[int], y_pred: Sequence[int]) -> float:
    return metrics(confusion(y_true, y_pred)).f1


METRICS_HEADER = ["model", "recall", "precision", "f1"]


def write_metrics_table(path: str | Path, rows: Iterable[tuple[str, MetricsReport]]) -> None:
    """Write ``model,recall,precision,f1`` rows sorted by F1 descending."""
    ordered = sorted(rows, key=lambda r: (-r[1].f1, r[0]))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRICS_HEADER)
        for name, rep in ordered:
            w.writerow([name, f"{rep.recall:.6f}", f"{rep.precision:.6f}", f"{rep.f1:.6f}"])
