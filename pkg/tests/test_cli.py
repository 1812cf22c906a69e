"""Command-line behavior: exit codes, output layout, reproducibility knobs."""

import json
import subprocess
import sys

import numpy as np
import pytest

from deepcand.cli import main
from deepcand.store import read_embeddings, read_index, read_selections, write_embeddings, write_index
from deepcand.synth import gaussian_topic_corpus


@pytest.fixture(scope="module")
def cli_files(tmp_path_factory):
    """A 16-doc corpus on disk plus a prebuilt candidate matrix."""
    root = tmp_path_factory.mktemp("cli")
    corpus = gaussian_topic_corpus(5, 16, dim=4, n_topics=2, k_min=4, k_max=8)
    emb = root / "corpus.emb"
    index = root / "corpus.index.jsonl"
    write_embeddings(corpus.embeddings, emb)
    write_index(corpus.index, index)
    means = np.array(
        [
            corpus.embeddings[e.start : e.start + e.count].mean(axis=0)
            for e in corpus.index.entries
        ]
    )
    cands = root / "cands.emb"
    write_embeddings(means, cands)
    return {"root": root, "emb": str(emb), "index": str(index), "cands": str(cands)}


def test_no_subcommand_is_usage_error(capsys):
    assert main([]) == 2
    assert main(["frobnicate"]) == 2


def test_help_lists_subcommands(capsys):
    assert main(["--help"]) == 0
    out = capsys.readouterr().out
    for name in ("table1", "depth", "audit", "privatize", "kmeans", "eval", "baseline", "selftest"):
        assert name in out


def test_table1_reports_four_rows(capsys):
    assert main(["table1"]) == 0
    lines = [l for l in capsys.readouterr().out.splitlines() if "probability=" in l]
    assert len(lines) == 4
    for line in lines:
        assert float(line.rsplit("=", 1)[1]) >= 0.95


def test_depth_writes_reports_and_summary(cli_files, tmp_path, capsys):
    out = tmp_path / "depths.jsonl"
    rc = main(
        [
            "depth",
            "--emb", cli_files["emb"],
            "--index", cli_files["index"],
            "--doc-id", "doc00003",
            "--candidates", cli_files["cands"],
            "--out", str(out),
        ]
    )
    assert rc == 0
    reports = [json.loads(l) for l in out.read_text().splitlines()]
    assert len(reports) == 16
    assert all(set(r) == {"candidate", "depth"} for r in reports)
    summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert summary["doc_id"] == "doc00003"
    assert summary["rule"] == "min"
    assert summary["p"] == 25
    assert reports[summary["deepest"]]["depth"] == summary["depth"]


def test_depth_missing_doc_id_fails(cli_files, capsys):
    rc = main(
        [
            "depth",
            "--emb", cli_files["emb"],
            "--index", cli_files["index"],
            "--doc-id", "nope",
            "--candidates", cli_files["cands"],
        ]
    )
    assert rc == 1
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "ValueError"
    assert "nope" in err["detail"]


def test_privatize_writes_selection_records(cli_files, tmp_path):
    out = tmp_path / "sel.jsonl"
    rc = main(
        [
            "privatize",
            "--emb", cli_files["emb"],
            "--index", cli_files["index"],
            "--candidates", cli_files["cands"],
            "--epsilon", "5.0",
            "--seed", "3",
            "--out", str(out),
        ]
    )
    assert rc == 0
    records = read_selections(out)
    assert [r.doc_id for r in records] == [f"doc{i:05d}" for i in range(16)]
    assert all(0 <= r.chosen_candidate < 16 for r in records)
    assert all(r.epsilon == 5.0 for r in records)


def test_privatize_thread_count_never_changes_output(cli_files, tmp_path, monkeypatch):
    args = [
        "privatize",
        "--emb", cli_files["emb"],
        "--index", cli_files["index"],
        "--candidates", cli_files["cands"],
        "--seed", "9",
    ]
    serial = tmp_path / "serial.jsonl"
    threaded = tmp_path / "threaded.jsonl"
    monkeypatch.delenv("DEEPCAND_THREADS", raising=False)
    assert main(args + ["--out", str(serial)]) == 0
    monkeypatch.setenv("DEEPCAND_THREADS", "4")
    assert main(args + ["--out", str(threaded)]) == 0
    assert serial.read_bytes() == threaded.read_bytes()


def test_bad_thread_env_is_a_validation_error(cli_files, tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("DEEPCAND_THREADS", "many")
    rc = main(
        [
            "privatize",
            "--emb", cli_files["emb"],
            "--index", cli_files["index"],
            "--candidates", cli_files["cands"],
            "--out", str(tmp_path / "x.jsonl"),
        ]
    )
    assert rc == 1
    err = json.loads(capsys.readouterr().err)
    assert "DEEPCAND_THREADS" in err["detail"]


def test_missing_file_reports_json_error(capsys, tmp_path):
    rc = main(
        [
            "privatize",
            "--emb", str(tmp_path / "absent.emb"),
            "--index", str(tmp_path / "absent.jsonl"),
            "--candidates", str(tmp_path / "absent2.emb"),
        ]
    )
    assert rc == 1
    err = json.loads(capsys.readouterr().err)
    assert set(err) == {"error", "detail"}


def test_audit_small_sweep_passes(capsys):
    rc = main(
        [
            "audit",
            "--pairs-per-kind", "3",
            "--group-pairs", "2",
            "--epsilon", "1,3",
            "--rule", "min",
        ]
    )
    assert rc == 0
    lines = capsys.readouterr().out.strip().splitlines()
    tail = json.loads(lines[-1])
    assert tail == {"pairs_audited": 3 * 3 * 2 + 2 * 2, "violations": 0}
    # one worst-case line per (kind, epsilon, rule)
    assert sum(1 for l in lines if l.startswith("kind=")) == 4 * 2


def test_classifier_then_eval_sweep(cli_files, tmp_path, capsys):
    """Train a checkpoint, then run both sweeps against it end to end."""
    clf = tmp_path / "clf"
    rc = main(
        [
            "train-classifier",
            "--emb", cli_files["emb"],
            "--index", cli_files["index"],
            "--epochs", "40",
            "--lr", "0.02",
            "--out", str(clf),
        ]
    )
    assert rc == 0
    capsys.readouterr()

    csv_out = tmp_path / "eps.csv"
    rc = main(
        [
            "eval", "sweep-eps",
            "--test-emb", cli_files["emb"],
            "--test-index", cli_files["index"],
            "--candidates-emb", cli_files["emb"],
            "--candidates-index", cli_files["index"],
            "--classifier", str(clf),
            "--m", "10",
            "--min-sentences", "4",
            "--trials", "1",
            "--epsilons", "5",
            "--out", str(csv_out),
        ]
    )
    assert rc == 0
    lines = csv_out.read_text().strip().splitlines()
    assert lines[0] == "axis,trial,score,mean,std"
    assert lines[-1].startswith("nonprivate,0,")
    assert len(lines) == 3

    rc = main(
        [
            "eval", "sweep-k",
            "--test-emb", cli_files["emb"],
            "--test-index", cli_files["index"],
            "--candidates-emb", cli_files["emb"],
            "--candidates-index", cli_files["index"],
            "--classifier", str(clf),
            "--m", "10",
            "--min-sentences", "4",
            "--trials", "1",
            "--buckets", "4-7,7-9",
            "--epsilon", "5",
            "--out", "-",
        ]
    )
    assert rc == 0
    out = capsys.readouterr().out.strip().splitlines()
    assert out[0] == "axis,trial,score,mean,std"
    assert any(l.startswith('"[4,7)"') for l in out)


def test_baseline_truncation_writes_one_row_per_doc(cli_files, tmp_path):
    prefix = str(tmp_path / "trunc")
    rc = main(
        [
            "baseline", "truncation",
            "--emb", cli_files["emb"],
            "--index", cli_files["index"],
            "--train-emb", cli_files["emb"],
            "--train-index", cli_files["index"],
            "--epsilon", "5",
            "--out", prefix,
        ]
    )
    assert rc == 0
    rows = read_embeddings(prefix + ".emb")
    assert rows.shape == (16, 4)
    entries = read_index(prefix + ".index.jsonl").entries
    assert len(entries) == 16
    assert all(e.count == 1 for e in entries)


def test_baseline_mdp_round_trips_tokens(tmp_path, capsys):
    vocab_emb = tmp_path / "vocab.emb"
    write_embeddings(10.0 * np.eye(3), vocab_emb)
    (tmp_path / "vocab.txt").write_text("aa\nbb\ncc\n")
    docs = tmp_path / "docs.jsonl"
    docs.write_text(json.dumps({"doc_id": "d1", "tokens": ["aa", "cc"]}) + "\n")
    rc = main(
        [
            "baseline", "mdp",
            "--tokens", str(docs),
            "--vocab-emb", str(vocab_emb),
            "--vocab-tokens", str(tmp_path / "vocab.txt"),
            "--epsilon", "50",
        ]
    )
    assert rc == 0
    out = json.loads(capsys.readouterr().out.strip())
    assert out == {"doc_id": "d1", "tokens": ["aa", "cc"]}


def test_selftest_command_passes(capsys):
    assert main(["selftest"]) == 0
    assert "PASS" in capsys.readouterr().out


def test_module_entrypoint_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "deepcand", "table1", "--m", "5000"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert "probability=" in proc.stdout
