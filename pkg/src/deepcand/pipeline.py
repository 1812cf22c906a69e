"""End-to-end workflows over corpora.

A document's embedding is the mean of its sentence embeddings. The
recoder is a same-width MLP H applied per sentence, trained jointly with
a linear head L so that L(mean(H(sentences))) predicts the document's
k-means cluster; the loss back-propagates through the mean into H (each
sentence receives 1/k of its document's mean-gradient). Candidates are
mean embeddings of sampled public documents, by default living in the
recoded space when a bundle is supplied.

Privatization processes documents independently: each document's
selection runs under a seed derived from (run seed, doc_id), so corpus
order, thread count, and batching can never change any output record.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .clustering import KMeansModel, fit_kmeans, load_kmeans, save_kmeans
from .mathkit import SeededRng, derive_seed
from .mechanism import PrivacyBudget, select_private_embedding
from .neural import AdamState, Mlp, adam_step, cross_entropy, load_mlp, predict, save_mlp
from .store import Corpus, SelectionRecord


def mean_embedding(sentences) -> np.ndarray:
    """The document embedding: the arithmetic mean of sentence rows."""
    s = np.asarray(sentences, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] < 1:
        raise ValueError("need a nonempty k x d sentence matrix")
    return s.mean(axis=0)


@dataclass
class CandidateSet:
    """Public candidate embeddings plus the documents they came from."""

    embeddings: np.ndarray = field(repr=False)
    source_doc_ids: list[str] = field(default_factory=list)
    min_sentences: int = 1

    def __post_init__(self):
        e = np.asarray(self.embeddings, dtype=np.float64)
        if e.ndim != 2 or e.shape[0] < 1:
            raise ValueError("candidate matrix must be nonempty")
        if not np.isfinite(e).all():
            raise ValueError("candidate embeddings must be finite")
        if len(self.source_doc_ids) != e.shape[0]:
            raise ValueError("need one source doc id per candidate row")
        self.embeddings = e

    @property
    def m(self) -> int:
        return self.embeddings.shape[0]


@dataclass
class RecoderBundle:
    """Recoder H, cluster head L, and the k-means model that labeled training docs."""

    recoder: Mlp
    head: Mlp
    kmeans: KMeansModel
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        d_out = self.recoder.dims[-1]
        if self.head.dims[0] != d_out:
            raise ValueError("recoder output width must match head input width")
        if self.kmeans.centers.shape[1] != self.recoder.dims[0]:
            raise ValueError("kmeans dimension must match recoder input width")

    def save(self, directory) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        save_mlp(self.recoder, d / "recoder")
        save_mlp(self.head, d / "head")
        save_kmeans(self.kmeans, d / "kmeans")
        (d / "bundle.json").write_text(
            json.dumps(self.metadata, indent=2, default=float) + "\n", encoding="utf-8"
        )

    @classmethod
    def load(cls, directory) -> "RecoderBundle":
        d = Path(directory)
        recoder, _ = load_mlp(d / "recoder")
        head, _ = load_mlp(d / "head")
        kmeans = load_kmeans(d / "kmeans")
        metadata = json.loads((d / "bundle.json").read_text(encoding="utf-8"))
        return cls(recoder=recoder, head=head, kmeans=kmeans, metadata=metadata)


def recode_document(bundle: RecoderBundle, sentences) -> np.ndarray:
    """Row-wise H(s_i); preserves the sentence count."""
    s = np.asarray(sentences, dtype=np.float64)
    if s.ndim != 2:
        raise ValueError("sentences must be a 2-dimensional matrix")
    return bundle.recoder.forward(s)


def doc_means(corpus: Corpus, bundle: RecoderBundle | None = None) -> np.ndarray:
    """One mean embedding per corpus entry, recoded when a bundle is given."""
    source = corpus.embeddings
    if bundle is not None:
        source = bundle.recoder.forward(source)
    rows = [
        source[e.start : e.start + e.count].mean(axis=0) for e in corpus.index.entries
    ]
    if not rows:
        raise ValueError("corpus has no documents")
    return np.array(rows)


def build_candidates(
    corpus: Corpus,
    min_sentences: int,
    m: int,
    rng: SeededRng,
    bundle: RecoderBundle | None = None,
) -> CandidateSet:
    """Sample m qualifying documents without replacement as candidates.

    A document qualifies when it has at least min_sentences sentences; the
    candidate embedding is the (recoded) document mean.
    """
    min_sentences, m = int(min_sentences), int(m)
    if min_sentences < 1 or m < 1:
        raise ValueError("min_sentences and m must be at least 1")
    qualifying = [e for e in corpus.index.entries if e.count >= min_sentences]
    if len(qualifying) < m:
        raise ValueError(
            f"only {len(qualifying)} documents have >= {min_sentences} sentences, need {m}"
        )
    picks = rng.choice(len(qualifying), m)
    source = corpus.embeddings
    if bundle is not None:
        source = bundle.recoder.forward(source)
    rows, ids = [], []
    for i in picks:
        e = qualifying[int(i)]
        rows.append(source[e.start : e.start + e.count].mean(axis=0))
        ids.append(e.doc_id)
    return CandidateSet(
        embeddings=np.array(rows), source_doc_ids=ids, min_sentences=min_sentences
    )


def _stack_docs(corpus: Corpus, entries):
    X = np.concatenate([corpus.doc_sentences(e) for e in entries], axis=0)
    counts = np.array([e.count for e in entries], dtype=np.int64)
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    return X, starts, counts


def _recoder_loss(recoder: Mlp, head: Mlp, corpus: Corpus, labels: np.ndarray) -> float:
    means = []
    z = recoder.forward(corpus.embeddings)
    for e in corpus.index.entries:
        means.append(z[e.start : e.start + e.count].mean(axis=0))
    loss, _ = cross_entropy(head.forward(np.array(means)), labels)
    return loss


def train_recoder(
    corpus: Corpus,
    n_clusters: int,
    epochs: int,
    rng: SeededRng,
    lr: float = 1e-3,
    batch_docs: int = 64,
) -> RecoderBundle:
    """Fit cluster targets, then jointly train recoder H and head L.

    Steps: (1) document means in the base space; (2) seeded k-means with
    n_clusters; (3) each document labeled by its cluster; (4) minimize
    cross-entropy of L(mean(H(sentences))) against those labels with one
    Adam instance over both parameter sets. epochs=0 returns the
    initialized bundle unchanged.
    """
    if corpus.n_docs < 1:
        raise ValueError("corpus has no documents")
    means = doc_means(corpus)
    km = fit_kmeans(means, n_clusters, rng.child("kmeans"))
    labels = km.labels
    d = corpus.dim
    recoder = Mlp([d, d, d, d, d], rng=rng.child("init-recoder"))
    head = Mlp([d, km.n_clusters], rng=rng.child("init-head"))
    params = recoder.params + head.params
    opt = AdamState(params, lr=lr)
    order_rng = rng.child("order")
    entries = corpus.index.entries
    loss_curve = [_recoder_loss(recoder, head, corpus, labels)]
    for _ in range(int(epochs)):
        perm = order_rng.permutation(len(entries))
        for lo in range(0, len(entries), int(batch_docs)):
            batch_ids = perm[lo : lo + int(batch_docs)]
            batch_entries = [entries[i] for i in batch_ids]
            y = labels[batch_ids]
            X, starts, counts = _stack_docs(corpus, batch_entries)
            z, cache_h = recoder.forward_cached(X)
            m_batch = np.add.reduceat(z, starts, axis=0) / counts[:, None]
            logits, cache_l = head.forward_cached(m_batch)
            _, dlogits = cross_entropy(logits, y)
            grads_l, d_mean = head.backward(cache_l, dlogits)
            dz = np.repeat(d_mean / counts[:, None], counts, axis=0)
            grads_h, _ = recoder.backward(cache_h, dz)
            adam_step(params, grads_h + grads_l, opt)
        loss_curve.append(_recoder_loss(recoder, head, corpus, labels))
    return RecoderBundle(
        recoder=recoder,
        head=head,
        kmeans=km,
        metadata={
            "n_clusters": int(km.n_clusters),
            "epochs": int(epochs),
            "lr": float(lr),
            "batch_docs": int(batch_docs),
            "loss_curve": [float(v) for v in loss_curve],
        },
    )


def privatize_corpus(
    corpus: Corpus,
    candidates,
    bundle: RecoderBundle | None,
    budget: PrivacyBudget,
    p: int,
    seed: int,
    rule: str = "min",
    workers: int = 1,
) -> list[SelectionRecord]:
    """One private selection per document, independent across documents.

    Each document runs under derive_seed(seed, doc_id), so records depend
    only on (document rows, candidates, bundle, budget, p, seed) and not
    on corpus order or worker count.
    """
    cand = candidates.embeddings if isinstance(candidates, CandidateSet) else np.asarray(
        candidates, dtype=np.float64
    )

    def run_one(entry) -> SelectionRecord:
        sents = corpus.doc_sentences(entry)
        if bundle is not None:
            sents = recode_document(bundle, sents)
        record, _ = select_private_embedding(
            sents, cand, budget, p, derive_seed(seed, entry.doc_id), rule=rule, doc_id=entry.doc_id
        )
        return record

    entries = corpus.index.entries
    if int(workers) > 1:
        with ThreadPoolExecutor(max_workers=int(workers)) as pool:
            return list(pool.map(run_one, entries))
    return [run_one(e) for e in entries]


def train_classifier(
    features,
    labels,
    r: int,
    epochs: int,
    rng: SeededRng,
    lr: float = 1e-3,
    batch_size: int = 64,
    val_features=None,
    val_labels=None,
) -> Mlp:
    """Train an MLP classifier with Adam and cross-entropy.

    The model is the default 4-affine-layer stack ending in r logits. The
    returned model carries loss_curve (full-dataset loss before training
    and after each epoch) and class_count. When a validation set is
    given, the parameters snapshot with the best validation macro-F1 is
    restored at the end (epoch selection), recorded as val_score.
    """
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("features must be a nonempty 2-dimensional matrix")
    if not np.isfinite(X).all():
        raise ValueError("features must be finite")
    if y.shape != (X.shape[0],):
        raise ValueError("need exactly one label per feature row")
    r = int(r)
    if r < 1 or (y.size and (y.min() < 0 or y.max() >= r)):
        raise ValueError(f"labels must lie in [0, {r})")
    d = X.shape[1]
    model = Mlp([d, d, d, d, r], rng=rng.child("init"))
    params = model.params
    opt = AdamState(params, lr=lr)
    order_rng = rng.child("order")
    curve = [cross_entropy(model.forward(X), y)[0]]
    best_score, best_params = None, None
    for _ in range(int(epochs)):
        perm = order_rng.permutation(X.shape[0])
        for lo in range(0, X.shape[0], int(batch_size)):
            bi = perm[lo : lo + int(batch_size)]
            logits, cache = model.forward_cached(X[bi])
            _, dlogits = cross_entropy(logits, y[bi])
            grads, _ = model.backward(cache, dlogits)
            adam_step(params, grads, opt)
        curve.append(cross_entropy(model.forward(X), y)[0])
        if val_features is not None:
            from .evalkit import macro_f1

            score = macro_f1(predict(model, val_features), np.asarray(val_labels), r)
            if best_score is None or score > best_score:
                best_score, best_params = score, [p.copy() for p in params]
    if best_params is not None:
        for p_arr, snap in zip(params, best_params):
            p_arr[:] = snap
        model.val_score = best_score
    model.loss_curve = [float(v) for v in curve]
    model.class_count = r
    return model
