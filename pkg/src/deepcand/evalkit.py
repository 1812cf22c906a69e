"""Utility metrics and the two evaluation sweeps (score vs epsilon, score vs k).

Sweeps privatize the test corpus per (axis point, trial) under a fixed
seed schedule derived up front from the config seed, so results are
reproducible and independent of execution order. Output is tabular:
columns (axis, trial, score, mean, std), plus one "nonprivate" reference
row scoring the classifier on unprivatized document means.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .mathkit import derive_seed
from .mechanism import PrivacyBudget
from .neural import Mlp, predict
from .pipeline import CandidateSet, RecoderBundle, doc_means, privatize_corpus
from .store import Corpus, CorpusIndex


def macro_f1(predictions, truth, r: int) -> float:
    """Unweighted mean over classes of per-class F1.

    A class counts toward the average when it appears in the truth or the
    predictions; classes absent from both are excluded. A counted class
    with no true positives scores 0.
    """
    pred = np.asarray(predictions, dtype=np.int64)
    tr = np.asarray(truth, dtype=np.int64)
    if pred.shape != tr.shape or pred.ndim != 1 or pred.size == 0:
        raise ValueError("predictions and truth must be matching nonempty vectors")
    r = int(r)
    if r < 1 or pred.min() < 0 or pred.max() >= r or tr.min() < 0 or tr.max() >= r:
        raise ValueError(f"labels must lie in [0, {r})")
    match = pred == tr
    tp = np.bincount(tr[match], minlength=r).astype(np.float64)
    fp = np.bincount(pred[~match], minlength=r).astype(np.float64)
    fn = np.bincount(tr[~match], minlength=r).astype(np.float64)
    present = (np.bincount(tr, minlength=r) + np.bincount(pred, minlength=r)) > 0
    denom = 2.0 * tp + fp + fn
    f1 = np.zeros(r)
    nz = denom > 0
    f1[nz] = 2.0 * tp[nz] / denom[nz]
    return float(f1[present].mean())


@dataclass
class EvalConfig:
    """Everything a sweep needs besides the test corpus and the axis."""

    candidates: CandidateSet
    classifier: Mlp
    class_labels: list[str]
    bundle: RecoderBundle | None = None
    p: int = 25
    rule: str = "min"
    seed: int = 0
    workers: int = 1


@dataclass
class SweepResult:
    """Per-axis-point trial scores with their mean/std and a reference."""

    axis_name: str
    axis: list
    scores: list = field(repr=False)  # per point: list of floats, or None if empty
    mean: list = field(default_factory=list)
    std: list = field(default_factory=list)
    reference: float | None = None


def _candidate_matrix(candidates) -> np.ndarray:
    if isinstance(candidates, CandidateSet):
        return candidates.embeddings
    return np.asarray(candidates, dtype=np.float64)


def _truth_ids(corpus: Corpus, class_labels: list[str]) -> np.ndarray:
    order = {lab: i for i, lab in enumerate(class_labels)}
    ids = []
    for e in corpus.index.entries:
        if e.label not in order:
            raise ValueError(f"label {e.label!r} was not in the classifier's training labels")
        ids.append(order[e.label])
    return np.array(ids, dtype=np.int64)


def _score_once(corpus: Corpus, config: EvalConfig, budget: PrivacyBudget, seed: int) -> float:
    records = privatize_corpus(
        corpus,
        config.candidates,
        config.bundle,
        budget,
        config.p,
        seed,
        rule=config.rule,
        workers=config.workers,
    )
    chosen = np.array([r.chosen_candidate for r in records], dtype=np.int64)
    features = _candidate_matrix(config.candidates)[chosen]
    preds = predict(config.classifier, features)
    truth = _truth_ids(corpus, config.class_labels)
    return macro_f1(preds, truth, len(config.class_labels))


def _reference_score(corpus: Corpus, config: EvalConfig) -> float:
    features = doc_means(corpus, config.bundle)
    preds = predict(config.classifier, features)
    truth = _truth_ids(corpus, config.class_labels)
    return macro_f1(preds, truth, len(config.class_labels))


def sweep_epsilon(corpus_test: Corpus, config: EvalConfig, epsilons, trials: int) -> SweepResult:
    """Privatize and score the test corpus at each epsilon, trials times."""
    epsilons = [float(e) for e in epsilons]
    if not epsilons or int(trials) < 1:
        raise ValueError("need at least one epsilon and one trial")
    scores, means, stds = [], [], []
    for eps in epsilons:
        budget = PrivacyBudget(eps)
        cell = [
            _score_once(
                corpus_test, config, budget, derive_seed(config.seed, f"eps={eps!r}:trial={t}")
            )
            for t in range(int(trials))
        ]
        scores.append(cell)
        means.append(float(np.mean(cell)))
        stds.append(float(np.std(cell)))
    return SweepResult(
        axis_name="epsilon",
        axis=epsilons,
        scores=scores,
        mean=means,
        std=stds,
        reference=_reference_score(corpus_test, config),
    )


def sweep_k(
    corpus_test: Corpus, config: EvalConfig, k_buckets, epsilon: float, trials: int
) -> SweepResult:
    """Score per sentence-count bucket [lo, hi) at a fixed epsilon.

    A bucket that matches no test document is reported as empty (None),
    not as zero.
    """
    buckets = [(int(lo), int(hi)) for lo, hi in k_buckets]
    if not buckets or int(trials) < 1:
        raise ValueError("need at least one bucket and one trial")
    budget = PrivacyBudget(float(epsilon))
    scores, means, stds = [], [], []
    for lo, hi in buckets:
        if lo >= hi:
            raise ValueError(f"bucket [{lo},{hi}) is empty by construction")
        sub_entries = [e for e in corpus_test.index.entries if lo <= e.count < hi]
        if not sub_entries:
            scores.append(None)
            means.append(None)
            stds.append(None)
            continue
        sub = Corpus(corpus_test.embeddings, CorpusIndex(sub_entries))
        cell = [
            _score_once(
                sub, config, budget, derive_seed(config.seed, f"k={lo}-{hi}:trial={t}")
            )
            for t in range(int(trials))
        ]
        scores.append(cell)
        means.append(float(np.mean(cell)))
        stds.append(float(np.std(cell)))
    return SweepResult(
        axis_name="k_bucket",
        axis=[f"[{lo},{hi})" for lo, hi in buckets],
        scores=scores,
        mean=means,
        std=stds,
        reference=_reference_score(corpus_test, config),
    )


def tune_projections(corpus_val: Corpus, config: EvalConfig, epsilon: float, p_grid, trials: int = 1) -> int:
    """Projection count maximizing mean validation score; ties take the smaller p."""
    grid = sorted({int(p) for p in p_grid})
    if not grid or any(p < 1 for p in grid):
        raise ValueError("p_grid must hold positive projection counts")
    budget = PrivacyBudget(float(epsilon))
    best_p, best_score = None, None
    for p in grid:
        cfg = replace(config, p=p)
        cell = [
            _score_once(
                corpus_val, cfg, budget, derive_seed(config.seed, f"tune-p={p}:trial={t}")
            )
            for t in range(int(trials))
        ]
        score = float(np.mean(cell))
        if best_score is None or score > best_score:
            best_p, best_score = p, score
    return int(best_p)


def write_csv(result: SweepResult, sink) -> None:
    """Emit (axis, trial, score, mean, std) rows plus a nonprivate reference row.

    Empty buckets produce a single row with blank trial/score/mean/std.
    """

    def _emit(fh):
        writer = csv.writer(fh)
        writer.writerow(["axis", "trial", "score", "mean", "std"])
        for i, point in enumerate(result.axis):
            cell = result.scores[i]
            if cell is None:
                writer.writerow([point, "", "", "", ""])
                continue
            for t, s in enumerate(cell):
                writer.writerow(
                    [point, t, f"{s:.6f}", f"{result.mean[i]:.6f}", f"{result.std[i]:.6f}"]
                )
        if result.reference is not None:
            writer.writerow(["nonprivate", 0, f"{result.reference:.6f}", f"{result.reference:.6f}", "0.000000"])

    if hasattr(sink, "write"):
        _emit(sink)
    else:
        with open(Path(sink), "w", newline="", encoding="utf-8") as fh:
            _emit(fh)
