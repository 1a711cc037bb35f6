"""Text dumps of the baseline models: one magic header line, then JSON.

Floats are written with ``repr`` precision, so a reload predicts identically.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .forest import ForestModel
from .gbm import GbmModel
from .logreg import LogRegModel
from .tree import TreeModel

MAGIC = "INFLACAST-BASELINE"
VERSION = 1


def _tree_to_dict(t: TreeModel) -> dict:
    return {
        "feature": t.feature.tolist(),
        "threshold": t.threshold.tolist(),
        "left": t.left.tolist(),
        "right": t.right.tolist(),
        "value": t.value.tolist(),
        "n_samples": t.n_samples.tolist(),
        "n_features": t.n_features,
        "max_depth": t.max_depth,
        "kind": t.kind,
        "depth": t.depth,
    }


def _tree_from_dict(d: dict) -> TreeModel:
    return TreeModel(
        feature=np.array(d["feature"], dtype=np.int64),
        threshold=np.array(d["threshold"], dtype=float),
        left=np.array(d["left"], dtype=np.int64),
        right=np.array(d["right"], dtype=np.int64),
        value=np.array(d["value"], dtype=float),
        n_samples=np.array(d["n_samples"], dtype=np.int64),
        n_features=d["n_features"],
        max_depth=d["max_depth"],
        kind=d["kind"],
        depth=d["depth"],
    )


def model_kind(model) -> str:
    for cls, name in ((LogRegModel, "logreg"), (TreeModel, "tree"), (ForestModel, "forest"), (GbmModel, "gbm")):
        if isinstance(model, cls):
            return name
    raise TypeError(f"not a baseline model: {type(model).__name__}")


def to_dict(model) -> dict:
    kind = model_kind(model)
    if kind == "logreg":
        body = {"weights": model.weights.tolist(), "bias": model.bias, "C": model.C,
                "max_iter": model.max_iter, "n_iter": model.n_iter, "converged": model.converged}
    elif kind == "tree":
        body = _tree_to_dict(model)
    elif kind == "forest":
        body = {"trees": [_tree_to_dict(t) for t in model.trees], "seeds": model.seeds,
                "max_features": model.max_features, "max_depth": model.max_depth,
                "bootstrap": model.bootstrap}
    else:
        body = {"init_logit": model.init_logit, "trees": [_tree_to_dict(t) for t in model.trees],
                "learning_rate": model.learning_rate, "n_estimators": model.n_estimators,
                "max_depth": model.max_depth, "n_features": model.n_features}
    return {"kind": kind, "body": body}


def from_dict(d: dict):
    kind, b = d["kind"], d["body"]
    if kind == "logreg":
        return LogRegModel(weights=np.array(b["weights"], dtype=float), bias=b["bias"], C=b["C"],
                           max_iter=b["max_iter"], n_iter=b["n_iter"], converged=b["converged"])
    if kind == "tree":
        return _tree_from_dict(b)
    if kind == "forest":
        return ForestModel(trees=[_tree_from_dict(t) for t in b["trees"]], seeds=b["seeds"],
                           max_features=b["max_features"], max_depth=b["max_depth"],
                           bootstrap=b["bootstrap"])
    if kind == "gbm":
        return GbmModel(init_logit=b["init_logit"], trees=[_tree_from_dict(t) for t in b["trees"]],
                        learning_rate=b["learning_rate"], n_estimators=b["n_estimators"],
                        max_depth=b["max_depth"], n_features=b["n_features"])
    raise ValueError(f"unknown model kind {kind!r}")


def save_model(model, path: str | Path, extra: dict | None = None) -> None:
    d = to_dict(model)
    if extra:
        d["extra"] = extra
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{MAGIC} {d['kind']} v{VERSION}\n")
        json.dump(d, fh, sort_keys=True, ensure_ascii=False)
        fh.write("\n")


def is_baseline_file(path: str | Path) -> bool:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.readline().startswith(MAGIC)
    except (OSError, UnicodeDecodeError):
        return False


def load_model(path: str | Path, with_extra: bool = False):
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 3 or header[0] != MAGIC:
            raise ValueError(f"{path}: not a baseline model file")
        if header[2] != f"v{VERSION}":
            raise ValueError(f"{path}: unsupported version {header[2]}")
        d = json.loads(fh.read())
    model = from_dict(d)
    return (model, d.get("extra", {})) if with_extra else model
