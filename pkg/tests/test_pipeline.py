import numpy as np
import pytest

from deepcand.mathkit import SeededRng, derive_seed
from deepcand.mechanism import PrivacyBudget, select_private_embedding
from deepcand.neural import predict
from deepcand.pipeline import (
    CandidateSet,
    RecoderBundle,
    build_candidates,
    doc_means,
    mean_embedding,
    privatize_corpus,
    recode_document,
    train_classifier,
    train_recoder,
)


def test_mean_embedding(tiny_corpus):
    doc_a = tiny_corpus.doc_sentences(tiny_corpus.index.entries[0])
    np.testing.assert_allclose(mean_embedding(doc_a), [1 / 3, 1 / 3])
    with pytest.raises(ValueError):
        mean_embedding(np.zeros((0, 2)))


def test_candidate_set_validation():
    with pytest.raises(ValueError):
        CandidateSet(np.zeros((2, 3)), ["only-one"])
    with pytest.raises(ValueError):
        CandidateSet(np.array([[np.inf, 0.0]]), ["a"])
    cs = CandidateSet(np.zeros((2, 3)), ["a", "b"])
    assert cs.m == 2


def test_doc_means(tiny_corpus):
    means = doc_means(tiny_corpus)
    assert means.shape == (3, 2)
    np.testing.assert_allclose(means[1], [5.5, 5.0])


def test_build_candidates_filters_and_samples(tiny_corpus):
    # docs have 3, 2, 4 sentences; threshold 3 keeps docs a and c
    cands = build_candidates(tiny_corpus, 3, 2, SeededRng(0, "cand"))
    assert sorted(cands.source_doc_ids) == ["a", "c"]
    by_id = dict(zip(cands.source_doc_ids, cands.embeddings))
    np.testing.assert_allclose(by_id["a"], [1 / 3, 1 / 3])
    np.testing.assert_allclose(by_id["c"], [8.5, 8.5])

    with pytest.raises(ValueError) as err:
        build_candidates(tiny_corpus, 3, 3, SeededRng(0))
    assert "only 2 documents" in str(err.value)


def test_build_candidates_deterministic(topic_corpus):
    a = build_candidates(topic_corpus, 4, 30, SeededRng(5).child("candidates"))
    b = build_candidates(topic_corpus, 4, 30, SeededRng(5).child("candidates"))
    assert a.source_doc_ids == b.source_doc_ids
    np.testing.assert_array_equal(a.embeddings, b.embeddings)


def test_train_recoder_bundle_shapes_and_loss(topic_corpus):
    bundle = train_recoder(topic_corpus, 3, 4, SeededRng(1))
    d = topic_corpus.dim
    assert bundle.recoder.dims == [d, d, d, d, d]
    assert bundle.head.dims == [d, 3]
    assert bundle.kmeans.n_clusters == 3
    curve = bundle.metadata["loss_curve"]
    assert len(curve) == 5
    assert curve[-1] < curve[0]
    recoded = recode_document(bundle, topic_corpus.doc_sentences(topic_corpus.index.entries[0]))
    assert recoded.shape == (topic_corpus.index.entries[0].count, d)


def test_recoder_bundle_save_load(tmp_path, topic_corpus):
    bundle = train_recoder(topic_corpus, 3, 2, SeededRng(1))
    bundle.save(tmp_path / "bundle")
    back = RecoderBundle.load(tmp_path / "bundle")
    assert back.metadata["n_clusters"] == 3
    probe = topic_corpus.embeddings[:5]
    np.testing.assert_allclose(
        back.recoder.forward(probe), bundle.recoder.forward(probe), atol=1e-5
    )
    means = doc_means(topic_corpus, back)
    assert means.shape == (topic_corpus.n_docs, topic_corpus.dim)


def test_privatize_corpus_per_doc_seeds(topic_corpus):
    cands = build_candidates(topic_corpus, 4, 25, SeededRng(3).child("candidates"))
    budget = PrivacyBudget(8.0)
    records = privatize_corpus(topic_corpus, cands, None, budget, 9, 71)
    assert len(records) == topic_corpus.n_docs
    assert [r.doc_id for r in records] == [e.doc_id for e in topic_corpus.index.entries]

    # each record reproduces standalone from its derived per-document seed
    entry = topic_corpus.index.entries[7]
    expected, _ = select_private_embedding(
        topic_corpus.doc_sentences(entry),
        cands.embeddings,
        budget,
        9,
        derive_seed(71, entry.doc_id),
        doc_id=entry.doc_id,
    )
    assert records[7] == expected


def test_privatize_corpus_worker_count_invariant(topic_corpus):
    cands = build_candidates(topic_corpus, 4, 25, SeededRng(3).child("candidates"))
    budget = PrivacyBudget(8.0)
    serial = privatize_corpus(topic_corpus, cands, None, budget, 9, 71, workers=1)
    threaded = privatize_corpus(topic_corpus, cands, None, budget, 9, 71, workers=4)
    assert serial == threaded


def test_train_classifier_learns_separated_classes():
    rng = SeededRng(15, "clf-data")
    features = np.vstack([rng.normals((30, 6)) + 5.0, rng.normals((30, 6)) - 5.0])
    labels = np.array([0] * 30 + [1] * 30)
    model = train_classifier(features, labels, 2, 60, SeededRng(4), lr=0.02)
    assert model.class_count == 2
    assert len(model.loss_curve) == 61
    assert model.loss_curve[-1] < 0.1 < model.loss_curve[0]
    assert (predict(model, features) == labels).all()


def test_train_classifier_epoch_selection_sets_val_score():
    rng = SeededRng(16, "clf-val")
    features = np.vstack([rng.normals((25, 4)) + 3.0, rng.normals((25, 4)) - 3.0])
    labels = np.array([0] * 25 + [1] * 25)
    val_x = np.vstack([rng.normals((10, 4)) + 3.0, rng.normals((10, 4)) - 3.0])
    val_y = np.array([0] * 10 + [1] * 10)
    model = train_classifier(
        features, labels, 2, 40, SeededRng(4), lr=0.02,
        val_features=val_x, val_labels=val_y,
    )
    assert model.val_score == 1.0


def test_train_classifier_reproducible():
    rng = SeededRng(17, "clf-repro")
    features = rng.normals((40, 5))
    labels = (np.arange(40) % 3).astype(np.int64)
    m1 = train_classifier(features, labels, 3, 5, SeededRng(9))
    m2 = train_classifier(features, labels, 3, 5, SeededRng(9))
    for w1, w2 in zip(m1.params, m2.params):
        np.testing.assert_array_equal(w1, w2)


def test_train_classifier_validation():
    with pytest.raises(ValueError):
        train_classifier(np.zeros((0, 3)), np.array([], dtype=int), 2, 1, SeededRng(0))
    with pytest.raises(ValueError):
        train_classifier(np.zeros((4, 3)), np.array([0, 1, 2, 3]), 3, 1, SeededRng(0))
    with pytest.raises(ValueError):
        train_classifier(np.zeros((2, 3)), np.array([0]), 2, 1, SeededRng(0))
