"""Synthetic corpora and neighbor-pair generators.

Shared by the test suite, the audit CLI (its bundled fixture), and the
selftest command. The topic corpus draws each document's sentences from
one of several well-separated Gaussian clouds, so document means carry
topic structure while individual sentences stay noisy.
"""

from __future__ import annotations

import numpy as np

from .mathkit import SeededRng, derive_seed
from .mechanism import PrivacyBudget, audit_group, audit_pair
from .store import Corpus, CorpusIndex, DocEntry

_KINDS = ("random", "extreme", "tie")


def gaussian_topic_corpus(
    seed: int,
    n_docs: int,
    dim: int = 32,
    n_topics: int = 4,
    k_min: int = 4,
    k_max: int = 20,
    topic_scale: float = 6.0,
    id_prefix: str = "doc",
) -> Corpus:
    """Balanced topic corpus: doc i belongs to topic i mod n_topics.

    Sentences are unit-variance Gaussians around the topic center; k is
    uniform on [k_min, k_max]. Labels are "topic0".."topic{n-1}", whose
    sorted order matches topic numbering for up to 10 topics.
    """
    if n_docs < 1 or n_topics < 1 or not (1 <= k_min <= k_max):
        raise ValueError("need n_docs >= 1, n_topics >= 1, 1 <= k_min <= k_max")
    if n_topics > 10:
        raise ValueError("label sort order only matches topic order for <= 10 topics")
    rng = SeededRng(seed, "synth")
    centers = rng.child("topics").normals((n_topics, dim)) * (topic_scale / np.sqrt(dim))
    blocks, entries = [], []
    start = 0
    for i in range(int(n_docs)):
        topic = i % n_topics
        drng = rng.child(f"doc{i}")
        k = k_min + int(drng.uniform() * (k_max - k_min + 1))
        sentences = centers[topic] + drng.normals((k, dim))
        blocks.append(sentences)
        entries.append(
            DocEntry(
                doc_id=f"{id_prefix}{i:05d}", label=f"topic{topic}", start=start, count=k
            )
        )
        start += k
    return Corpus(embeddings=np.concatenate(blocks, axis=0), index=CorpusIndex(entries))


def neighbor_variant(rng: SeededRng, sentences: np.ndarray, kind: str, candidates=None) -> np.ndarray:
    """Copy of sentences with one row replaced, per the adversary kind.

    "random" swaps in a fresh Gaussian row; "extreme" a Gaussian scaled by
    1e6; "tie" duplicates another sentence row (or, half the time when
    candidates are given, copies a candidate row) to force projection
    ties.
    """
    if kind not in _KINDS:
        raise ValueError(f"kind must be one of {_KINDS}")
    s = np.asarray(sentences, dtype=np.float64)
    k, d = s.shape
    i = int(rng.uniform() * k)
    out = s.copy()
    if kind == "random":
        out[i] = rng.normals(d)
    elif kind == "extreme":
        out[i] = rng.normals(d) * 1e6
    else:
        if candidates is not None and rng.uniform() < 0.5:
            cand = np.asarray(candidates, dtype=np.float64)
            out[i] = cand[int(rng.uniform() * cand.shape[0])]
        else:
            out[i] = s[(i + 1) % k]
    return out


def audit_sweep(
    seed: int = 0,
    pairs_per_kind: int = 70,
    epsilons=(1.0, 3.0, 10.0),
    rules=("min", "max"),
    k: int = 8,
    d: int = 6,
    m: int = 40,
    p: int = 12,
    group_pairs: int = 25,
) -> list[dict]:
    """Audit generated neighbor pairs of every kind at every (epsilon, rule).

    Returns one dict per audit with the measured log-ratio and its bound;
    group entries (kind "group-a2") audit two-row swaps against 2*epsilon.
    """
    rng = SeededRng(seed, "audit-sweep")
    # same scale as the documents so swaps actually move depths; remote
    # candidates would sit at depth zero on both sides and audit nothing
    candidates = rng.child("candidates").normals((m, d))
    results = []
    for kind in _KINDS:
        krng = rng.child(kind)
        for i in range(int(pairs_per_kind)):
            prng = krng.child(f"pair{i}")
            x = prng.normals((k, d))
            x_prime = neighbor_variant(prng, x, kind, candidates=candidates)
            pair_seed = derive_seed(seed, f"{kind}/{i}")
            for eps in epsilons:
                for rule in rules:
                    ratio = audit_pair(
                        x, x_prime, candidates, PrivacyBudget(eps), p, pair_seed, rule=rule
                    )
                    results.append(
                        {
                            "kind": kind,
                            "epsilon": float(eps),
                            "rule": rule,
                            "ratio": float(ratio),
                            "bound": float(eps) + 1e-9,
                        }
                    )
    for i in range(int(group_pairs)):
        prng = rng.child(f"group{i}")
        x = prng.normals((k, d))
        x_prime = x.copy()
        rows = prng.choice(k, 2)
        x_prime[rows[0]] = prng.normals(d)
        x_prime[rows[1]] = prng.normals(d)
        pair_seed = derive_seed(seed, f"group/{i}")
        for eps in epsilons:
            for rule in rules:
                ratio = audit_group(
                    x, x_prime, 2, candidates, PrivacyBudget(eps), p, pair_seed, rule=rule
                )
                results.append(
                    {
                        "kind": "group-a2",
                        "epsilon": float(eps),
                        "rule": rule,
                        "ratio": float(ratio),
                        "bound": 2.0 * float(eps) + 1e-9,
                    }
                )
    return results
