import json
from pathlib import Path

import pytest

from readmeter.cli import main

TINY_CONFIG = """\
[simulate]
n_users = 3
newsletters_per_user = 2
n_newsletters = 3
messages_min = 3
messages_max = 5
words_min = 30
words_max = 60
session_min = 20
session_max = 30

[train]
max_epochs = 2

[evaluate]
rounds = 2
"""


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text(TINY_CONFIG)
    return str(path)


def run_cli(*argv):
    return main(list(argv))


def tree_bytes(root: Path):
    return {
        str(p.relative_to(root)): p.read_bytes()
        for p in sorted(root.rglob("*")) if p.is_file()
    }


def test_simulate_is_byte_deterministic(tmp_path, config_file, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run_cli("simulate", "--out", str(a), "--seed", "5", "--config", config_file) == 0
    assert run_cli("simulate", "--out", str(b), "--seed", "5", "--config", config_file) == 0
    assert tree_bytes(a) == tree_bytes(b)
    stats = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert stats["n_users"] == 3


def test_full_pipeline_smoke(tmp_path, config_file, capsys):
    corpus = tmp_path / "corpus"
    feats = tmp_path / "features"
    ckpt = tmp_path / "model.json"
    evald = tmp_path / "eval"
    cmp_dir = tmp_path / "cmp"

    assert run_cli("simulate", "--out", str(corpus), "--seed", "3", "--config", config_file) == 0
    assert run_cli("features", "--corpus", str(corpus), "--out", str(feats)) == 0
    assert (feats / "timestamp.tsv").exists() and (feats / "session.tsv").exists()

    assert run_cli("train", "--corpus", str(corpus), "--kind", "logistic",
                   "--out", str(ckpt), "--config", config_file, "--seed", "1") == 0
    assert ckpt.exists()

    assert run_cli("evaluate", "--corpus", str(corpus), "--out", str(evald),
                   "--kinds", "baseline1,baseline2,logistic", "--seed", "2",
                   "--features", str(feats), "--config", config_file) == 0
    rounds = json.loads((evald / "rounds.json").read_text())
    assert len(rounds["rounds"]) == 2
    assert (evald / "summary.json").exists()
    assert (evald / "resolved-config.ini").exists()

    assert run_cli("compare", "--eval", str(evald), "--out", str(cmp_dir)) == 0
    comparisons = json.loads((cmp_dir / "comparisons.json").read_text())
    assert any(c["model_a"] == "baseline1" and c["model_b"] == "logistic" for c in comparisons)
    assert (cmp_dir / "table.txt").read_text().startswith("question")

    capsys.readouterr()
    assert run_cli("report", "--eval", str(evald)) == 0
    out = capsys.readouterr().out
    assert "logistic" in out and "rounds: 2" in out

    assert run_cli("report", "--corpus", str(corpus)) == 0


def test_evaluate_reuses_feature_files_identically(tmp_path, config_file):
    corpus = tmp_path / "corpus"
    feats = tmp_path / "features"
    run_cli("simulate", "--out", str(corpus), "--seed", "4", "--config", config_file)
    run_cli("features", "--corpus", str(corpus), "--out", str(feats))
    out_a, out_b = tmp_path / "ea", tmp_path / "eb"
    args = ["--corpus", str(corpus), "--kinds", "baseline1,logistic",
            "--seed", "9", "--config", config_file]
    assert run_cli("evaluate", *args, "--out", str(out_a), "--features", str(feats)) == 0
    assert run_cli("evaluate", *args, "--out", str(out_b)) == 0
    assert (out_a / "rounds.json").read_bytes() == (out_b / "rounds.json").read_bytes()


def test_evaluate_ground_truth_estimator_is_perfect(tmp_path, config_file, capsys):
    corpus = tmp_path / "corpus"
    run_cli("simulate", "--out", str(corpus), "--seed", "6", "--config", config_file)
    evald = tmp_path / "eval"
    assert run_cli("evaluate", "--corpus", str(corpus), "--out", str(evald),
                   "--kinds", "ground-truth", "--rounds", "2", "--seed", "1",
                   "--config", config_file) == 0
    summary = json.loads((evald / "summary.json").read_text())
    assert summary["ground-truth"]["accuracy"] == 1.0
    assert summary["ground-truth"]["per_error"] in (0.0, None)


def test_schema_lists_versioned_columns(capsys):
    assert run_cli("schema") == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["timestamp"]["version"] == "ts-v1"
    assert "msg_window_share" in doc["timestamp"]["columns"]
    assert doc["session"]["version"] == "sess-v1"
    assert doc["estimator_inputs"]["pattern-nn"]["tower_b"]


def test_unknown_config_key_rejected(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[simulate]\nwarp_speed = 9\n")
    assert run_cli("simulate", "--out", str(tmp_path / "x"), "--config", str(bad)) == 2
    assert "warp_speed" in capsys.readouterr().err


def test_missing_corpus_fails_with_diagnostic(tmp_path, capsys):
    assert run_cli("features", "--corpus", str(tmp_path / "nope"), "--out", str(tmp_path / "o")) == 2
    err = capsys.readouterr().err
    assert "nope" in err


def test_unknown_kind_fails(tmp_path, config_file, capsys):
    corpus = tmp_path / "corpus"
    run_cli("simulate", "--out", str(corpus), "--seed", "3", "--config", config_file)
    assert run_cli("train", "--corpus", str(corpus), "--kind", "hal9000",
                   "--out", str(tmp_path / "m.json")) == 2
    assert "hal9000" in capsys.readouterr().err


def test_ingest_subcommand(tmp_path):
    (tmp_path / "messages.csv").write_text(
        "newsletter_id,msg_id,x,y,w,h,words\nnl,a,0,0,900,300,50\n")
    (tmp_path / "interactions.csv").write_text(
        "user_id,newsletter_id,t,event,x,y,scroll_y,win_w,win_h,msg_id,visible\n"
        "p,nl,0,open,,,,,,,\np,,5,close,,,,,,,\n")
    out = tmp_path / "corpus"
    assert run_cli("ingest", "--interactions", str(tmp_path / "interactions.csv"),
                   "--messages", str(tmp_path / "messages.csv"), "--out", str(out)) == 0
    from readmeter.corpus import load_corpus
    corpus = load_corpus(out)
    assert corpus.runs[0].user_id == "p"
