"""Command-line surface: one subcommand per workflow.

Exit codes: 0 success, 1 validation failure (JSON diagnostic on stderr),
2 usage error. Every subcommand taking --seed is bit-reproducible across
runs. DEEPCAND_THREADS is the only environment input; it sizes the
privatization worker pool (default 1) and never changes outputs.

CSV outputs use columns (axis, trial, score, mean, std); the final row
is the nonprivate reference scored on unprivatized document means.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import selftest as selftest_mod
from .baselines import fit_box, load_vocab, truncation_mechanism, word_mdp
from .clustering import fit_kmeans, save_kmeans
from .errors import DeepcandError
from .evalkit import EvalConfig, sweep_epsilon, sweep_k, write_csv
from .mathkit import SeededRng, derive_seed, sample_unit_sphere
from .mechanism import TABLE1_ROWS, PrivacyBudget, check_table1
from .neural import load_mlp, save_mlp
from .pipeline import (
    RecoderBundle,
    build_candidates,
    doc_means,
    privatize_corpus,
    train_classifier,
    train_recoder,
)
from .store import (
    CorpusIndex,
    DocEntry,
    load_corpus,
    read_embeddings,
    write_embeddings,
    write_index,
    write_selections,
)
from .synth import audit_sweep
from .tukey import approx_depth, deepest_candidate


def _workers() -> int:
    raw = os.environ.get("DEEPCAND_THREADS", "").strip()
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"DEEPCAND_THREADS must be an integer, got {raw!r}") from None


def _load_bundle(path):
    return RecoderBundle.load(path) if path else None


def _out_stream(path):
    if path in (None, "-"):
        return sys.stdout, False
    return open(path, "w", encoding="utf-8"), True


def _load_candidates(args, run_rng, bundle):
    """Either a prebuilt EMB1 matrix or a sampled set from a corpus."""
    if args.candidates:
        return read_embeddings(args.candidates)
    if args.candidates_emb and args.candidates_index:
        corpus = load_corpus(args.candidates_emb, args.candidates_index)
        return build_candidates(
            corpus, args.min_sentences, args.m, run_rng.child("candidates"), bundle
        )
    raise ValueError(
        "need either --candidates or both --candidates-emb and --candidates-index"
    )


def _cmd_table1(args) -> int:
    budgetless_rows = TABLE1_ROWS
    failures = []
    for eps, b, jstar in budgetless_rows:
        prob = check_table1(args.m, b, jstar, PrivacyBudget(eps))
        print(f"epsilon={eps:g} b={b} jstar={jstar} m={args.m} probability={prob:.6f}")
        if prob < 0.95:
            failures.append((eps, b, jstar, prob))
    if failures:
        raise DeepcandError(f"rows below 0.95: {failures}")
    return 0


def _cmd_depth(args) -> int:
    corpus = load_corpus(args.emb, args.index)
    entry = next((e for e in corpus.index.entries if e.doc_id == args.doc_id), None)
    if entry is None:
        raise ValueError(f"doc_id {args.doc_id!r} not present in the index")
    sentences = corpus.doc_sentences(entry)
    bundle = _load_bundle(args.bundle)
    if bundle is not None:
        sentences = bundle.recoder.forward(sentences)
    candidates = read_embeddings(args.candidates)
    projections = sample_unit_sphere(
        SeededRng(args.seed).child("projections"), candidates.shape[1], args.projections
    )
    reports = approx_depth(candidates, sentences, projections, rule=args.rule)
    stream, close = _out_stream(args.out)
    try:
        for r in reports:
            stream.write(json.dumps({"candidate": r.candidate, "depth": r.depth}) + "\n")
    finally:
        if close:
            stream.close()
    best = deepest_candidate(reports)
    print(
        json.dumps(
            {
                "doc_id": entry.doc_id,
                "k": entry.count,
                "p": args.projections,
                "rule": args.rule,
                "deepest": best,
                "depth": reports[best].depth,
            }
        )
    )
    return 0


def _cmd_audit(args) -> int:
    epsilons = [float(v) for v in args.epsilon.split(",") if v]
    rules = ("min", "max") if args.rule == "both" else (args.rule,)
    results = audit_sweep(
        seed=args.seed,
        pairs_per_kind=args.pairs_per_kind,
        epsilons=epsilons,
        rules=rules,
        k=args.k,
        d=args.dim,
        m=args.m,
        p=args.projections,
        group_pairs=args.group_pairs,
    )
    worst = {}
    violations = 0
    for row in results:
        key = (row["kind"], row["epsilon"], row["rule"])
        worst[key] = max(worst.get(key, 0.0), row["ratio"])
        if row["ratio"] > row["bound"]:
            violations += 1
    for (kind, eps, rule), ratio in sorted(worst.items()):
        bound = 2.0 * eps if kind == "group-a2" else eps
        print(
            f"kind={kind} epsilon={eps:g} rule={rule} "
            f"max_log_ratio={ratio:.9f} bound={bound:g}"
        )
    if violations:
        raise DeepcandError(f"{violations} audits exceeded their bound")
    print(json.dumps({"pairs_audited": len(results), "violations": 0}))
    return 0


def _cmd_privatize(args) -> int:
    corpus = load_corpus(args.emb, args.index)
    bundle = _load_bundle(args.bundle)
    run_rng = SeededRng(args.seed)
    candidates = _load_candidates(args, run_rng, bundle)
    if args.save_candidates:
        matrix = candidates if isinstance(candidates, np.ndarray) else candidates.embeddings
        write_embeddings(matrix, args.save_candidates)
    records = privatize_corpus(
        corpus,
        candidates,
        bundle,
        PrivacyBudget(args.epsilon),
        args.projections,
        args.seed,
        rule=args.rule,
        workers=_workers(),
    )
    stream, close = _out_stream(args.out)
    try:
        write_selections(records, stream)
    finally:
        if close:
            stream.close()
    return 0


def _cmd_kmeans(args) -> int:
    corpus = load_corpus(args.emb, args.index)
    bundle = _load_bundle(args.bundle)
    means = doc_means(corpus, bundle)
    model = fit_kmeans(means, args.clusters, SeededRng(args.seed).child("kmeans"))
    save_kmeans(model, args.out)
    print(json.dumps({"n_clusters": model.n_clusters, "inertia": model.inertia}))
    return 0


def _cmd_train_recoder(args) -> int:
    corpus = load_corpus(args.emb, args.index)
    bundle = train_recoder(
        corpus,
        args.clusters,
        args.epochs,
        SeededRng(args.seed),
        lr=args.lr,
        batch_docs=args.batch_docs,
    )
    bundle.save(args.out)
    curve = bundle.metadata["loss_curve"]
    print(json.dumps({"initial_loss": curve[0], "final_loss": curve[-1], "epochs": args.epochs}))
    return 0


def _cmd_train_classifier(args) -> int:
    corpus = load_corpus(args.emb, args.index)
    bundle = _load_bundle(args.bundle)
    features = doc_means(corpus, bundle)
    class_labels = corpus.index.labels()
    labels = corpus.index.class_ids()
    val_features = val_labels = None
    if args.val_emb and args.val_index:
        val_corpus = load_corpus(args.val_emb, args.val_index)
        order = {lab: i for i, lab in enumerate(class_labels)}
        for e in val_corpus.index.entries:
            if e.label not in order:
                raise ValueError(f"validation label {e.label!r} unseen in training labels")
        val_features = doc_means(val_corpus, bundle)
        val_labels = np.array([order[e.label] for e in val_corpus.index.entries])
    model = train_classifier(
        features,
        labels,
        len(class_labels),
        args.epochs,
        SeededRng(args.seed),
        lr=args.lr,
        batch_size=args.batch_size,
        val_features=val_features,
        val_labels=val_labels,
    )
    extra = {"class_labels": class_labels, "loss_curve": model.loss_curve}
    if hasattr(model, "val_score"):
        extra["val_score"] = model.val_score
    save_mlp(model, args.out, extra=extra)
    print(
        json.dumps(
            {
                "classes": len(class_labels),
                "initial_loss": model.loss_curve[0],
                "final_loss": model.loss_curve[-1],
            }
        )
    )
    return 0


def _cmd_baseline_truncation(args) -> int:
    train = load_corpus(args.train_emb, args.train_index)
    test = load_corpus(args.emb, args.index)
    box = fit_box(doc_means(train), coverage=args.coverage)
    budget = PrivacyBudget(args.epsilon)
    rows, entries = [], []
    for i, entry in enumerate(test.index.entries):
        rng = SeededRng(derive_seed(args.seed, entry.doc_id), "truncation")
        rows.append(
            truncation_mechanism(
                test.doc_sentences(entry), box, budget, rng, width_mode=args.width_mode
            )
        )
        entries.append(DocEntry(entry.doc_id, entry.label, i, 1))
    write_embeddings(np.array(rows), args.out + ".emb")
    write_index(CorpusIndex(entries), args.out + ".index.jsonl")
    print(json.dumps({"documents": len(rows), "epsilon": args.epsilon}))
    return 0


def _cmd_baseline_mdp(args) -> int:
    vocab = load_vocab(args.vocab_emb, args.vocab_tokens)
    budget = PrivacyBudget(args.epsilon)
    with open(args.tokens, encoding="utf-8") as fh:
        docs = [json.loads(line) for line in fh if line.strip()]
    stream, close = _out_stream(args.out)
    try:
        for doc in docs:
            rng = SeededRng(derive_seed(args.seed, doc["doc_id"]), "mdp")
            private = word_mdp(doc["tokens"], vocab, budget, rng)
            stream.write(json.dumps({"doc_id": doc["doc_id"], "tokens": private}) + "\n")
    finally:
        if close:
            stream.close()
    return 0


def _cmd_eval(args) -> int:
    test = load_corpus(args.test_emb, args.test_index)
    bundle = _load_bundle(args.bundle)
    run_rng = SeededRng(args.seed)
    train = load_corpus(args.candidates_emb, args.candidates_index)
    candidates = build_candidates(
        train, args.min_sentences, args.m, run_rng.child("candidates"), bundle
    )
    classifier, extra = load_mlp(args.classifier)
    class_labels = extra.get("class_labels")
    if not class_labels:
        raise ValueError("classifier checkpoint lacks class_labels metadata")
    config = EvalConfig(
        candidates=candidates,
        classifier=classifier,
        class_labels=class_labels,
        bundle=bundle,
        p=args.projections,
        rule=args.rule,
        seed=args.seed,
        workers=_workers(),
    )
    if args.eval_command == "sweep-eps":
        epsilons = [float(v) for v in args.epsilons.split(",") if v]
        result = sweep_epsilon(test, config, epsilons, args.trials)
    else:
        buckets = []
        for span in args.buckets.split(","):
            lo, hi = span.split("-")
            buckets.append((int(lo), int(hi)))
        result = sweep_k(test, config, buckets, args.epsilon, args.trials)
    stream, close = _out_stream(args.out)
    try:
        write_csv(result, stream)
    finally:
        if close:
            stream.close()
    return 0


def _cmd_selftest(args) -> int:
    ok = selftest_mod.run_all()
    if not ok:
        raise DeepcandError("selftest failures (see lines above)")
    return 0


def _add_corpus_flags(sp, prefix="", required=True):
    name = prefix
    sp.add_argument(f"--{name}emb", required=required, help="EMB1 embedding block")
    sp.add_argument(f"--{name}index", required=required, help="corpus index (JSON lines)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="deepcand",
        description="Sentence-private document embeddings via depth-weighted candidate selection.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, seed=True, rule=True, projections=True):
        if seed:
            sp.add_argument("--seed", type=int, default=0, help="64-bit run seed")
        if rule:
            sp.add_argument(
                "--rule",
                choices=("min", "max"),
                default="min",
                help="depth aggregation across projections",
            )
        if projections:
            sp.add_argument(
                "--projections", type=int, default=25, help="projection count p"
            )

    sp = sub.add_parser(
        "table1",
        help="probability of sampling the deep spike for the four reference rows",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    sp.add_argument("--m", type=int, default=5000, help="candidate count")
    sp.set_defaults(func=_cmd_table1)

    sp = sub.add_parser(
        "depth",
        help="per-candidate depth reports for one document",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    _add_corpus_flags(sp)
    sp.add_argument("--doc-id", required=True, help="document to score against")
    sp.add_argument("--candidates", required=True, help="candidate EMB1 block")
    sp.add_argument("--bundle", default=None, help="recoder bundle directory")
    sp.add_argument("--out", default="-", help="depth report JSON lines ('-' = stdout)")
    common(sp)
    sp.set_defaults(func=_cmd_depth)

    sp = sub.add_parser(
        "audit",
        help="exact privacy audit over generated neighbor pairs",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    sp.add_argument("--epsilon", default="1,3,10", help="comma-separated epsilons")
    sp.add_argument(
        "--rule", choices=("min", "max", "both"), default="both", help="aggregation rules to audit"
    )
    sp.add_argument("--pairs-per-kind", type=int, default=70, help="neighbor pairs per adversary kind")
    sp.add_argument("--group-pairs", type=int, default=25, help="two-row group pairs")
    sp.add_argument("--k", type=int, default=8, help="sentences per generated document")
    sp.add_argument("--dim", type=int, default=6, help="embedding dimension of the fixture")
    sp.add_argument("--m", type=int, default=40, help="candidate count of the fixture")
    sp.add_argument("--projections", type=int, default=12, help="projection count p")
    sp.add_argument("--seed", type=int, default=0, help="64-bit run seed")
    sp.set_defaults(func=_cmd_audit)

    sp = sub.add_parser(
        "privatize",
        help="one private candidate selection per document",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    _add_corpus_flags(sp)
    sp.add_argument("--candidates", default=None, help="prebuilt candidate EMB1 block")
    sp.add_argument("--candidates-emb", default=None, help="corpus to sample candidates from: EMB1")
    sp.add_argument("--candidates-index", default=None, help="corpus to sample candidates from: index")
    sp.add_argument("--m", type=int, default=5000, help="candidates to sample")
    sp.add_argument("--min-sentences", type=int, default=8, help="candidate qualification threshold")
    sp.add_argument("--bundle", default=None, help="recoder bundle directory")
    sp.add_argument("--epsilon", type=float, default=10.0, help="privacy budget")
    sp.add_argument("--out", default="-", help="selection records JSON lines ('-' = stdout)")
    sp.add_argument("--save-candidates", default=None, help="also write the candidate matrix here")
    common(sp)
    sp.set_defaults(func=_cmd_privatize)

    sp = sub.add_parser(
        "kmeans",
        help="cluster document means; writes centers.emb + kmeans.json",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    _add_corpus_flags(sp)
    sp.add_argument("--clusters", type=int, default=50, help="cluster count n_c")
    sp.add_argument("--bundle", default=None, help="recoder bundle directory")
    sp.add_argument("--out", required=True, help="output directory")
    common(sp, rule=False, projections=False)
    sp.set_defaults(func=_cmd_kmeans)

    sp = sub.add_parser(
        "train-recoder",
        help="fit cluster targets and train the sentence recoder",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    _add_corpus_flags(sp)
    sp.add_argument("--clusters", type=int, default=50, help="cluster count n_c")
    sp.add_argument("--epochs", type=int, default=10, help="training epochs")
    sp.add_argument("--lr", type=float, default=1e-3, help="Adam learning rate")
    sp.add_argument("--batch-docs", type=int, default=64, help="documents per step")
    sp.add_argument("--out", required=True, help="bundle output directory")
    common(sp, rule=False, projections=False)
    sp.set_defaults(func=_cmd_train_recoder)

    sp = sub.add_parser(
        "train-classifier",
        help="train an MLP on document means (labels from the index)",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    _add_corpus_flags(sp)
    sp.add_argument("--bundle", default=None, help="recoder bundle directory")
    sp.add_argument("--epochs", type=int, default=30, help="training epochs")
    sp.add_argument("--lr", type=float, default=1e-3, help="Adam learning rate")
    sp.add_argument("--batch-size", type=int, default=64, help="examples per step")
    sp.add_argument("--val-emb", default=None, help="validation corpus EMB1 (epoch selection)")
    sp.add_argument("--val-index", default=None, help="validation corpus index")
    sp.add_argument("--out", required=True, help="checkpoint output directory")
    common(sp, rule=False, projections=False)
    sp.set_defaults(func=_cmd_train_classifier)

    sp = sub.add_parser(
        "baseline",
        help="comparison mechanisms",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    bsub = sp.add_subparsers(dest="baseline_command", required=True)

    bt = bsub.add_parser(
        "truncation",
        help="clip-average-noise document embeddings",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    _add_corpus_flags(bt)
    bt.add_argument("--train-emb", required=True, help="box-fitting corpus EMB1")
    bt.add_argument("--train-index", required=True, help="box-fitting corpus index")
    bt.add_argument("--coverage", type=float, default=0.75, help="central quantile coverage")
    bt.add_argument(
        "--width-mode",
        choices=("per_dim", "max"),
        default="per_dim",
        help="noise width convention",
    )
    bt.add_argument("--epsilon", type=float, default=10.0, help="privacy budget")
    bt.add_argument("--out", required=True, help="output prefix (.emb + .index.jsonl)")
    common(bt, rule=False, projections=False)
    bt.set_defaults(func=_cmd_baseline_truncation)

    bm = bsub.add_parser(
        "mdp",
        help="word-level metric-DP token randomization",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    bm.add_argument("--tokens", required=True, help="JSON lines {doc_id, tokens}")
    bm.add_argument("--vocab-emb", required=True, help="vocabulary EMB1 block")
    bm.add_argument("--vocab-tokens", required=True, help="one token per line, UTF-8")
    bm.add_argument("--epsilon", type=float, default=10.0, help="privacy budget")
    bm.add_argument("--out", default="-", help="privatized tokens JSON lines ('-' = stdout)")
    common(bm, rule=False, projections=False)
    bm.set_defaults(func=_cmd_baseline_mdp)

    sp = sub.add_parser(
        "eval",
        help="macro-F1 sweeps over epsilon or sentence-count buckets",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    esub = sp.add_subparsers(dest="eval_command", required=True)
    for name, extra_help in (("sweep-eps", "score vs epsilon"), ("sweep-k", "score vs k bucket")):
        ep = esub.add_parser(
            name, help=extra_help, formatter_class=argparse.ArgumentDefaultsHelpFormatter
        )
        _add_corpus_flags(ep, prefix="test-")
        ep.add_argument("--candidates-emb", required=True, help="candidate-source corpus EMB1")
        ep.add_argument("--candidates-index", required=True, help="candidate-source corpus index")
        ep.add_argument("--classifier", required=True, help="classifier checkpoint directory")
        ep.add_argument("--bundle", default=None, help="recoder bundle directory")
        ep.add_argument("--m", type=int, default=5000, help="candidates to sample")
        ep.add_argument("--min-sentences", type=int, default=8, help="candidate qualification threshold")
        ep.add_argument("--trials", type=int, default=5, help="trials per axis point")
        ep.add_argument("--out", default="-", help="CSV destination ('-' = stdout)")
        if name == "sweep-eps":
            ep.add_argument(
                "--epsilons",
                default="3,6,10,15,20,25,30",
                help="comma-separated epsilon axis",
            )
        else:
            ep.add_argument("--buckets", default="4-8,8-12,12-21", help="k buckets lo-hi (half-open)")
            ep.add_argument("--epsilon", type=float, default=10.0, help="privacy budget")
        common(ep)
        ep.set_defaults(func=_cmd_eval, eval_command=name)

    sp = sub.add_parser(
        "selftest",
        help="run the quick property suite",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    sp.set_defaults(func=_cmd_selftest)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else int(exc.code)
    try:
        return args.func(args)
    except (DeepcandError, ValueError, OSError, KeyError) as exc:
        json.dump({"error": type(exc).__name__, "detail": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
