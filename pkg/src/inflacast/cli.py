"""Command-line pipeline: make-fixtures, filter-groups, label, train, evaluate, explain.

Every subcommand takes ``--config`` (TOML), ``--seed`` and ``--out``. Data
outputs depend only on the inputs, the config and the seed; timestamps and
wall-clock timings go to ``inflacast.log`` in the output directory.

Exit codes: 0 success, 1 runtime or data error, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import logging
import os
import sys
import time
from pathlib import Path
from typing import Any

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import attribution, corpus, evalkit, fixtures, labeler, plots
from .baselines import TrainingError
from .classifier import BASELINE_KINDS, fit_baseline, fit_encoder, load_classifier, parse_model_name
from .encoder import TrainConfig
from .vectorizer import VectorizerConfig

logger = logging.getLogger("inflacast")

# From-scratch encoders need a far larger step than fine-tuning a pretrained
# one; 2e-5 barely moves a randomly initialised model in five epochs.
DESK_ENCODER_LR = 1e-3

DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "paths": {"groups": "groups.csv", "posts": "posts.jsonl", "series": "inflation.csv",
              "labeled": "labeled_posts.jsonl"},
    "fixtures": {"scale": "small", "plain_rate": 0.2},
    "filter": {"min_members": 2000, "min_share_pct": 20.0, "bins": 100,
               "sweep_lo": 1500, "sweep_hi": 2500, "sweep_steps": 11},
    "labeler": {"order": 1, "merge_window_months": 3},
    "split": {"test_frac": 0.2, "val_frac_of_train": 0.25},
    "vectorizer": {"lowercase": True, "min_token_len": 2, "max_vocab": 50000},
    "models": {
        "logreg": {"C": 1.0, "max_iter": 1000},
        "tree": {"max_depth": 10},
        "forest": {"max_depth": 10, "n_trees": 100},
        "gbm": {"learning_rate": 0.05, "n_estimators": 200},
        "encoder": {"d_model": 64, "n_heads": 4, "n_layers": 2, "d_ff": 256, "dropout_rate": 0.1,
                    "tokenizer_vocab": 8000, "batch_size": 32, "epochs": 5,
                    "learning_rate": DESK_ENCODER_LR, "weight_decay": 0.01},
    },
    "explain": {"exact_max_tokens": 12, "n_permutations": 2000, "output": "proba", "antithetic": False},
}


class ConfigError(Exception):
    """Bad or missing configuration; exit code 2."""


class UsageError(Exception):
    """Bad arguments or missing required input files; exit code 2."""


# ---------------------------------------------------------------------------
# config


def _merge(base: dict, override: dict, where: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        if key not in base:
            raise ConfigError(f"unknown config key {where}{key!r}")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"config key {where}{key!r} must be a table")
            out[key] = _merge(base[key], val, f"{where}{key}.")
        else:
            out[key] = val
    return out


def load_config(path: str | None, seed: int | None) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            with open(path, "rb") as fh:
                user = tomllib.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        cfg = _merge(cfg, user)
    if seed is not None:
        cfg["seed"] = seed
    return cfg


def _require(path: str | Path, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{what} not found: {p}")
    return p


# ---------------------------------------------------------------------------
# output helpers


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _write_csv(path: Path, header: list[str], rows) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    os.replace(tmp, path)


def _archive_config(out: Path, command: str, cfg: dict) -> None:
    _atomic_write_text(out / f"config.{command}.json", json.dumps(cfg, indent=2, sort_keys=True) + "\n")


def _setup_logging(out: Path) -> logging.Handler:
    handler = logging.FileHandler(out / "inflacast.log", encoding="utf-8")
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger()
    root.addHandler(handler)
    root.setLevel(logging.INFO)
    return handler


def _g(x: float) -> str:
    return repr(float(x))


# ---------------------------------------------------------------------------
# subcommands


def cmd_make_fixtures(args, cfg: dict, out: Path) -> int:
    fx = cfg["fixtures"]
    scale = args.scale or fx["scale"]
    try:
        truth = fixtures.generate(out, seed=cfg["seed"], scale=scale, plain_rate=float(fx["plain_rate"]))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    print(f"wrote fixtures to {out} (seed={truth.seed}, scale={scale}, "
          f"negation F1 ceiling={truth.negation_f1_ceiling:.4f})")
    return 0


def cmd_filter_groups(args, cfg: dict, out: Path) -> int:
    fc = cfg["filter"]
    src = _require(args.groups or cfg["paths"]["groups"], "groups file")
    groups = corpus.read_groups(src)
    fcfg = corpus.FilterConfig(min_members=int(fc["min_members"]), min_share_pct=float(fc["min_share_pct"]))
    kept = corpus.filter_groups(groups, fcfg)
    corpus.write_groups(out / "groups_filtered.csv", kept)

    hist = corpus.share_histogram(groups, bins=int(fc["bins"]), log_scale=True)
    _write_csv(out / "share_histogram.csv", ["lo_pct", "hi_pct", "count", "log10_count_plus_1"],
               [(_g(a), _g(b), c, _g(lc)) for a, b, c, lc in hist.rows()])
    plots.write_svg(out / "share_histogram.svg", plots.bar_chart(
        hist.edges, hist.counts, "Regional share of members", "share, %", "groups"))
    plots.write_svg(out / "share_histogram_log.svg", plots.bar_chart(
        hist.edges, hist.log_counts, "Regional share of members (log scale)", "share, %", "log10(groups + 1)"))

    sweep = corpus.robustness_sweep(groups, lo=int(fc["sweep_lo"]), hi=int(fc["sweep_hi"]),
                                    steps=int(fc["sweep_steps"]), min_share_pct=fcfg.min_share_pct)
    _write_csv(out / "robustness_sweep.csv", ["min_members", "surviving_groups"], sweep.rows())
    plots.write_svg(out / "robustness_sweep.svg", plots.line_chart(
        sweep.thresholds, {"surviving": sweep.counts}, "Member-threshold sweep", "min members", "groups"))
    print(f"{len(kept)} of {len(groups)} groups kept; sweep max relative change "
          f"{sweep.max_relative_change:.4f}")
    return 0


def cmd_label(args, cfg: dict, out: Path) -> int:
    lc = cfg["labeler"]
    series_path = _require(args.series or cfg["paths"]["series"], "inflation series")
    posts_path = _require(args.posts or cfg["paths"]["posts"], "posts file")
    series = labeler.read_series(series_path)
    tl = labeler.label_series(series, labeler.ExtremaConfig(order=int(lc["order"]),
                                                            merge_window_months=int(lc["merge_window_months"])))
    # corpus window, not the series span: a post the series cannot label is an error
    posts = corpus.ingest_posts(posts_path)
    pairs = labeler.label_posts(posts, tl)
    corpus.write_posts(out / "labeled_posts.jsonl", [p for p, _ in pairs], [lab for _, lab in pairs])
    labeler.write_breakpoints(out / "breakpoints.csv", tl.breakpoints, series)
    labeler.write_labeling(out / "month_labels.csv", tl)
    months = np.arange(len(series))
    plots.write_svg(out / "inflation_series.svg", plots.line_chart(
        months, {"inflation, % m/m": series.values}, "Monthly inflation and breakpoints",
        f"months since {series.start_month}", "%",
        markers=[(bp.index, bp.kind.value[:3]) for bp in tl.breakpoints]))
    print(f"{len(tl.breakpoints)} breakpoints; {len(pairs)} posts labeled")
    return 0


def read_labeled(path: Path) -> tuple[list[str], list[str], np.ndarray]:
    ids, texts, labels = [], [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                ids.append(str(rec["post_id"]))
                texts.append(str(rec["text"]))
                labels.append(int(rec["label"]))
            except (ValueError, KeyError, TypeError) as exc:
                raise corpus.IngestError(lineno, f"bad labeled record: {exc}") from exc
    return ids, texts, np.asarray(labels, dtype=np.int64)


def _split(cfg: dict, labels: np.ndarray) -> evalkit.DatasetSplit:
    sc = cfg["split"]
    return evalkit.split(labels, seed=cfg["seed"], test_frac=float(sc["test_frac"]),
                         val_frac_of_train=float(sc["val_frac_of_train"]))


def _write_predictions(path: Path, ids, y_true, proba) -> None:
    _write_csv(path, ["post_id", "label", "p_class1", "predicted"],
               [(i, int(t), _g(p), int(p >= 0.5)) for i, t, p in zip(ids, y_true, proba)])


def read_predictions(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return (np.array([int(r["label"]) for r in rows]), np.array([int(r["predicted"]) for r in rows]))


def cmd_train(args, cfg: dict, out: Path) -> int:
    try:
        kind, max_len = parse_model_name(args.model)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    data = _require(args.data or out / cfg["paths"]["labeled"], "labeled corpus")
    ids, texts, y = read_labeled(data)
    sp = _split(cfg, y)
    take = lambda idx: [texts[i] for i in idx]  # noqa: E731
    name = args.model
    t0 = time.perf_counter()
    if kind in BASELINE_KINDS:
        params = dict(cfg["models"][kind])
        if kind == "forest":
            params["seed"] = cfg["seed"]
        vc = cfg["vectorizer"]
        clf = fit_baseline(kind, take(sp.train), y[sp.train], params,
                           VectorizerConfig(bool(vc["lowercase"]), int(vc["min_token_len"]), int(vc["max_vocab"])))
    else:
        ec = dict(cfg["models"]["encoder"])
        tc = TrainConfig(batch_size=int(ec.pop("batch_size")), epochs=int(ec.pop("epochs")),
                         learning_rate=float(ec.pop("learning_rate")), weight_decay=float(ec.pop("weight_decay")),
                         seed=cfg["seed"])
        vocab = int(ec.pop("tokenizer_vocab"))
        clf = fit_encoder(take(sp.train), y[sp.train], take(sp.validation), y[sp.validation],
                          max_len=max_len, model_config=ec, train_config=tc, tokenizer_vocab=vocab)
        curve = clf.curve
        _write_csv(out / f"{name}.loss.csv", ["epoch", "train_loss", "val_loss"],
                   [(e, _g(a), _g(b)) for e, a, b in curve.rows()])
        epochs = list(range(1, len(curve.train_loss) + 1))
        plots.write_svg(out / f"{name}.loss.svg", plots.line_chart(
            epochs, {"train": curve.train_loss, "validation": curve.val_loss},
            f"{name} loss", "epoch", "cross-entropy"))
    logger.info("trained %s on %d posts in %.2fs", name, len(sp.train), time.perf_counter() - t0)
    clf.save(out / f"{name}.model")
    proba = clf.predict_proba(take(sp.test))
    _write_predictions(out / f"{name}.predictions.csv", [ids[i] for i in sp.test], y[sp.test], proba)
    rep = evalkit.metrics(evalkit.confusion(y[sp.test], (proba >= 0.5).astype(int)))
    evalkit.write_metrics_table(out / f"{name}.metrics.csv", [(name, rep)])
    print(f"{name}: recall {rep.recall:.4f} precision {rep.precision:.4f} F1 {rep.f1:.4f}")
    return 0


def cmd_evaluate(args, cfg: dict, out: Path) -> int:
    paths = [_require(m, "model file") for m in args.models]
    data = _require(args.data or out / cfg["paths"]["labeled"], "labeled corpus")
    ids, texts, y = read_labeled(data)
    sp = _split(cfg, y)
    test_texts = [texts[i] for i in sp.test]
    rows = []
    for p in paths:
        clf = load_classifier(p)
        name = p.stem
        pred = (clf.predict_proba(test_texts) >= 0.5).astype(int)
        rows.append((name, evalkit.metrics(evalkit.confusion(y[sp.test], pred))))
    evalkit.write_metrics_table(out / "metrics.csv", rows)
    for name, rep in sorted(rows, key=lambda r: (-r[1].f1, r[0])):
        print(f"{name:12s} recall {rep.recall:.4f} precision {rep.precision:.4f} F1 {rep.f1:.4f}")
    return 0


def cmd_explain(args, cfg: dict, out: Path) -> int:
    ec = cfg["explain"]
    clf = load_classifier(_require(args.model, "model file"))
    text = args.text
    if args.text_file:
        text = _require(args.text_file, "text file").read_text(encoding="utf-8")
    if not text or not text.strip():
        raise UsageError("explain needs --text or --text-file with non-empty content")
    try:
        ecfg = attribution.ExplainConfig(exact_max_tokens=int(ec["exact_max_tokens"]),
                                         n_permutations=int(ec["n_permutations"]), seed=cfg["seed"],
                                         antithetic=bool(ec["antithetic"]), output=str(ec["output"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    att = attribution.explain(clf, text, ecfg)
    attribution.render_report(att, out / (args.name or "explanation"))
    print(attribution.render_ansi(att))
    print(f"f(x) = {att.fx:.4f}, base = {att.base_value:.4f}, method = {att.method}")
    return 0


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML config file")
    common.add_argument("--seed", type=int, help="overrides the config seed")
    common.add_argument("--out", default=".", help="output directory (default: current)")

    ap = argparse.ArgumentParser(prog="inflacast", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("make-fixtures", parents=[common], help="write seeded synthetic inputs")
    p.add_argument("--scale", choices=sorted(fixtures.SCALES))
    p.set_defaults(func=cmd_make_fixtures)

    p = sub.add_parser("filter-groups", parents=[common], help="filter groups by size and regional share")
    p.add_argument("--groups", help="groups CSV")
    p.set_defaults(func=cmd_filter_groups)

    p = sub.add_parser("label", parents=[common], help="label posts from the inflation trend")
    p.add_argument("--posts", help="posts JSONL")
    p.add_argument("--series", help="inflation series CSV")
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("train", parents=[common], help="train one model on the 60/20/20 split")
    p.add_argument("model", help="logreg | tree | forest | gbm | encoder-64 | encoder-128 | encoder-256 | encoder-512")
    p.add_argument("--data", help="labeled posts JSONL (default: <out>/labeled_posts.jsonl)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", parents=[common], help="score saved models on the test split")
    p.add_argument("models", nargs="+", help="model files")
    p.add_argument("--data", help="labeled posts JSONL (default: <out>/labeled_posts.jsonl)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("explain", parents=[common], help="Shapley token attribution for one text")
    p.add_argument("model", help="model file")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--text")
    src.add_argument("--text-file")
    p.add_argument("--name", help="report base name (default: explanation)")
    p.set_defaults(func=cmd_explain)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handler = None
    try:
        cfg = load_config(args.config, args.seed)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        handler = _setup_logging(out)
        logger.info("command %s started", args.command)
        _archive_config(out, args.command, cfg)
        t0 = time.perf_counter()
        code = args.func(args, cfg, out)
        logger.info("command %s finished in %.2fs", args.command, time.perf_counter() - t0)
        return code
    except (ConfigError, UsageError) as exc:
        print(f"inflacast: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, KeyError, TrainingError, labeler.LabelingError, corpus.IngestError) as exc:
        logger.error("%s", exc)
        print(f"inflacast: error: {exc}", file=sys.stderr)
        return 1
    finally:
        if handler is not None:
            logging.getLogger().removeHandler(handler)
            handler.close()


if __name__ == "__main__":
    sys.exit(main())
