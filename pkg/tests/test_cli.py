import csv
import json

import numpy as np
import pytest

from inflacast import cli, evalkit
from inflacast.attribution import read_phi_csv
from inflacast.cli import main

FAST = """
seed = 3
[models.encoder]
d_model = 16
n_heads = 2
n_layers = 1
d_ff = 32
epochs = 1
tokenizer_vocab = 300
[models.forest]
n_trees = 5
max_depth = 4
[models.gbm]
n_estimators = 10
[explain]
n_permutations = 200
"""


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """One full run: fixtures, filtering, labeling and two trained models."""
    out = tmp_path_factory.mktemp("run")
    cfg = out / "fast.toml"
    cfg.write_text(FAST, encoding="utf-8")
    common = ["--config", cfg, "--out", out]
    assert run("make-fixtures", *common) == 0
    assert run("filter-groups", "--groups", out / "groups.csv", *common) == 0
    assert run("label", "--posts", out / "posts.jsonl", "--series", out / "inflation.csv", *common) == 0
    assert run("train", "logreg", *common) == 0
    assert run("train", "tree", *common) == 0
    return out, common


def test_outputs_present(pipeline):
    out, _ = pipeline
    for name in ["groups.csv", "posts.jsonl", "inflation.csv", "fixture_truth.json",
                 "groups_filtered.csv", "share_histogram.csv", "robustness_sweep.csv", "share_histogram.svg",
                 "labeled_posts.jsonl", "breakpoints.csv", "month_labels.csv", "inflation_series.svg",
                 "logreg.model", "logreg.tfidf", "logreg.predictions.csv", "logreg.metrics.csv",
                 "config.train.json", "inflacast.log"]:
        assert (out / name).exists(), name


def test_breakpoints_match_planted(pipeline):
    out, _ = pipeline
    truth = json.loads((out / "fixture_truth.json").read_text(encoding="utf-8"))
    with open(out / "breakpoints.csv", newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == len(truth["planted_breakpoints"])
    assert [r["kind"] for r in rows] == truth["planted_kinds"]


def test_metrics_row_matches_predictions(pipeline):
    out, _ = pipeline
    y, pred = cli.read_predictions(out / "logreg.predictions.csv")
    rep = evalkit.metrics(evalkit.confusion(y, pred))
    with open(out / "logreg.metrics.csv", newline="", encoding="utf-8") as fh:
        row = next(csv.DictReader(fh))
    assert float(row["f1"]) == pytest.approx(rep.f1, abs=1e-6)
    assert float(row["recall"]) == pytest.approx(rep.recall, abs=1e-6)


def test_evaluate_sorted(pipeline):
    out, common = pipeline
    assert run("evaluate", out / "tree.model", out / "logreg.model", *common) == 0
    with open(out / "metrics.csv", newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    assert {r["model"] for r in rows} == {"tree", "logreg"}
    f1 = [float(r["f1"]) for r in rows]
    assert f1 == sorted(f1, reverse=True)


def test_evaluate_reproduces_train_metrics(pipeline):
    out, common = pipeline
    assert run("evaluate", out / "logreg.model", *common) == 0
    a = (out / "metrics.csv").read_text(encoding="utf-8")
    assert a == (out / "logreg.metrics.csv").read_text(encoding="utf-8")


def test_explain_sidecar(pipeline, capsys):
    out, common = pipeline
    assert run("explain", out / "logreg.model", "--text", "цены на бензин выросли", *common) == 0
    assert "f(x)" in capsys.readouterr().out
    toks, phi = read_phi_csv(out / "explanation.csv")
    att = json.loads((out / "explanation.json").read_text(encoding="utf-8"))
    assert toks == ["цены", "на", "бензин", "выросли"]
    assert abs(sum(phi) - (att["fx"] - att["base_value"])) < 1e-9


def test_train_encoder_writes_loss_curve(pipeline):
    out, common = pipeline
    assert run("train", "encoder-64", *common) == 0
    lines = (out / "encoder-64.loss.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "epoch,train_loss,val_loss" and len(lines) == 2
    assert (out / "encoder-64.model").exists() and (out / "encoder-64.tok").exists()
    assert run("explain", out / "encoder-64.model", "--text", "тарифы не выросли", "--name", "enc", *common) == 0
    assert (out / "enc.html").exists()


def test_rerun_is_byte_identical(pipeline, tmp_path):
    out, _ = pipeline
    cfg = out / "fast.toml"
    common = ["--config", cfg, "--out", tmp_path]
    assert run("make-fixtures", *common) == 0
    assert run("filter-groups", "--groups", tmp_path / "groups.csv", *common) == 0
    assert run("label", "--posts", tmp_path / "posts.jsonl", "--series", tmp_path / "inflation.csv", *common) == 0
    assert run("train", "logreg", *common) == 0
    for name in ["groups_filtered.csv", "share_histogram.svg", "robustness_sweep.csv", "labeled_posts.jsonl",
                 "breakpoints.csv", "logreg.model", "logreg.predictions.csv", "logreg.metrics.csv"]:
        assert (out / name).read_bytes() == (tmp_path / name).read_bytes(), name


# --- error paths -------------------------------------------------------------------

def test_missing_groups_file(tmp_path, capsys):
    assert run("filter-groups", "--groups", tmp_path / "nope.csv", "--out", tmp_path) == 2
    assert "nope.csv" in capsys.readouterr().err


def test_unknown_model(pipeline):
    out, common = pipeline
    assert run("train", "svm", *common) == 2
    assert run("train", "encoder-100", *common) == 2


def test_missing_checkpoint(tmp_path):
    assert run("evaluate", tmp_path / "gone.model", "--out", tmp_path) == 2
    assert run("explain", tmp_path / "gone.model", "--text", "x", "--out", tmp_path) == 2


def test_unlabeled_month(pipeline, tmp_path, capsys):
    out, _ = pipeline
    short = tmp_path / "short.csv"
    lines = (out / "inflation.csv").read_text(encoding="utf-8").splitlines()
    short.write_text("\n".join(lines[:-12]) + "\n", encoding="utf-8")
    posts = tmp_path / "posts.jsonl"
    posts.write_text(json.dumps({"post_id": "a", "group_id": "g", "text": "цены", "month": "2022-03"},
                                ensure_ascii=False) + "\n", encoding="utf-8")
    assert run("label", "--posts", posts, "--series", short, "--out", tmp_path) == 1
    assert "2022-03" in capsys.readouterr().err


def test_bad_config_key(tmp_path):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("[filter]\nmin_member = 10\n", encoding="utf-8")
    assert run("filter-groups", "--config", cfg, "--out", tmp_path) == 2


def test_bad_toml(tmp_path):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("[filter\n", encoding="utf-8")
    assert run("filter-groups", "--config", cfg, "--out", tmp_path) == 2


def test_argparse_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["train"])
    assert exc.value.code == 2


def test_config_archived_with_seed_override(tmp_path):
    run("make-fixtures", "--seed", 11, "--out", tmp_path)
    archived = json.loads((tmp_path / "config.make-fixtures.json").read_text(encoding="utf-8"))
    assert archived["seed"] == 11
    assert archived["models"]["encoder"]["learning_rate"] == cli.DESK_ENCODER_LR
    assert np.isclose(json.loads((tmp_path / "fixture_truth.json").read_text())["negation_f1_ceiling"], 0.6)
