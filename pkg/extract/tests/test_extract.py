"""Corpus parsing, encoding, and output file layout."""

import json
import struct
import sys

import numpy as np
import pytest

from embed_extract.encoders import EncoderLoadError, HashEncoder, load_encoder
from embed_extract.extract import (
    CorpusFormatError,
    EmptyCorpusError,
    RawDoc,
    extract_corpus,
    read_raw_corpus,
    run_extract,
    write_embedding_block,
)


def _write_lines(path, objs):
    path.write_text("\n".join(json.dumps(o) for o in objs) + "\n", encoding="utf-8")


def test_read_raw_corpus_happy_path(tmp_path):
    raw = tmp_path / "corpus.jsonl"
    raw.write_text(
        "# a comment\n"
        + json.dumps({"doc_id": "a", "label": "pos", "text": "Hi there. Bye."})
        + "\n\n"
        + json.dumps({"doc_id": "b", "label": "neg", "text": "One sentence"})
        + "\n"
    )
    docs = read_raw_corpus(raw)
    assert [d.doc_id for d in docs] == ["a", "b"]
    assert docs[0].label == "pos"


@pytest.mark.parametrize(
    "line,fragment",
    [
        ("{broken", "line 1"),
        ('["not", "an", "object"]', "JSON object"),
        ('{"doc_id": "a", "label": "x"}', "text"),
        ('{"doc_id": "a", "label": "x", "text": "  "}', "empty text"),
        ('{"doc_id": "a", "label": 3, "text": "Hello."}', "label"),
    ],
)
def test_read_raw_corpus_rejects_bad_lines(tmp_path, line, fragment):
    raw = tmp_path / "bad.jsonl"
    raw.write_text(line + "\n")
    with pytest.raises(CorpusFormatError) as err:
        read_raw_corpus(raw)
    assert fragment in str(err.value)


def test_read_raw_corpus_rejects_duplicate_ids(tmp_path):
    raw = tmp_path / "dup.jsonl"
    _write_lines(
        raw,
        [
            {"doc_id": "a", "label": "x", "text": "Hello."},
            {"doc_id": "a", "label": "y", "text": "Again."},
        ],
    )
    with pytest.raises(CorpusFormatError, match="line 2"):
        read_raw_corpus(raw)


def test_read_raw_corpus_empty_file(tmp_path):
    raw = tmp_path / "empty.jsonl"
    raw.write_text("# only a comment\n")
    with pytest.raises(EmptyCorpusError):
        read_raw_corpus(raw)


def test_hash_encoder_is_deterministic_and_cached():
    a = HashEncoder(dim=32)
    b = HashEncoder(dim=32)
    va = a.encode(["alpha beta"])
    vb = b.encode(["alpha beta"])
    np.testing.assert_array_equal(va, vb)
    # mean pooling: a two-token sentence is the average of the singles
    singles = a.encode(["alpha", "beta"])
    np.testing.assert_allclose(va[0], singles.mean(axis=0))
    # token vectors are unit length
    assert np.linalg.norm(singles[0]) == pytest.approx(1.0)
    assert not np.allclose(singles[0], singles[1])


def test_hash_encoder_tokenization_is_case_insensitive():
    enc = HashEncoder(dim=16)
    np.testing.assert_array_equal(enc.encode(["Apple Pie!"]), enc.encode(["apple pie"]))


def test_hash_encoder_empty_sentence_is_zero():
    enc = HashEncoder(dim=8)
    np.testing.assert_array_equal(enc.encode(["..."]), np.zeros((1, 8)))


def test_load_encoder_variants():
    assert load_encoder("hash").dim == 768
    assert load_encoder("hash:16").dim == 16
    assert load_encoder("hash:16").identity == "hash:16"
    with pytest.raises(EncoderLoadError):
        load_encoder("hash:zero")
    with pytest.raises(EncoderLoadError):
        load_encoder("hash:0")
    with pytest.raises(EncoderLoadError):
        load_encoder("word2vec:whatever")
    with pytest.raises(EncoderLoadError):
        load_encoder("sbert:")


def test_sbert_route_reports_missing_dependency(monkeypatch):
    monkeypatch.setitem(sys.modules, "sentence_transformers", None)
    with pytest.raises(EncoderLoadError, match="not installed"):
        load_encoder("sbert:some-model")


def _toy_docs():
    return [
        RawDoc("a", "pos", "First one. Second one. Third one."),
        RawDoc("b", "neg", "Only lonely."),
        RawDoc("c", "pos", "Two here. Yes two."),
    ]


def test_extract_counts_sum_to_rows():
    result = extract_corpus(_toy_docs(), HashEncoder(dim=8), min_sentences=1)
    assert [e["count"] for e in result.entries] == [3, 1, 2]
    assert result.matrix.shape == (6, 8)
    assert [e["start"] for e in result.entries] == [0, 3, 4]
    assert result.dropped == []


def test_extract_drops_short_documents_and_logs():
    lines = []
    result = extract_corpus(_toy_docs(), HashEncoder(dim=8), min_sentences=2, log=lines.append)
    assert [e["doc_id"] for e in result.entries] == ["a", "c"]
    assert result.dropped == [("b", 1)]
    assert len(lines) == 1 and "dropped b" in lines[0]
    # starts are re-packed after the drop
    assert [e["start"] for e in result.entries] == [0, 3]


def test_extract_rejects_emptied_corpus():
    with pytest.raises(EmptyCorpusError):
        extract_corpus(_toy_docs(), HashEncoder(dim=8), min_sentences=10)
    with pytest.raises(ValueError):
        extract_corpus(_toy_docs(), HashEncoder(dim=8), min_sentences=0)


def test_embedding_block_layout(tmp_path):
    matrix = np.array([[1.5, -2.0], [0.25, 8.0], [3.0, 4.0]])
    out = tmp_path / "block.emb"
    write_embedding_block(matrix, out)
    blob = out.read_bytes()
    magic, version, rows, dim = struct.unpack("<4sIII", blob[:16])
    assert (magic, version, rows, dim) == (b"EMB1", 1, 3, 2)
    payload = np.frombuffer(blob[16:], dtype="<f4").reshape(3, 2)
    np.testing.assert_array_equal(payload, matrix.astype(np.float32))
    with pytest.raises(ValueError):
        write_embedding_block(np.array([[np.inf, 0.0]]), out)


def test_run_extract_files_parse_with_downstream_reader(tmp_path):
    """The selection tooling must accept the produced files byte-exactly."""
    deepcand_store = pytest.importorskip("deepcand.store")
    raw = tmp_path / "corpus.jsonl"
    _write_lines(
        raw,
        [
            {"doc_id": "a", "label": "pos", "text": "Alpha beta. Gamma delta. Epsilon."},
            {"doc_id": "b", "label": "neg", "text": "Mu nu. Xi omicron."},
            {"doc_id": "short", "label": "neg", "text": "Tiny."},
        ],
    )
    summary = run_extract(raw, tmp_path / "out", load_encoder("hash:12"))
    assert summary == {"documents": 2, "sentences": 5, "dim": 12, "dropped": 1}

    emb = deepcand_store.read_embeddings(tmp_path / "out.emb")
    index = deepcand_store.read_index(tmp_path / "out.index.jsonl")
    assert emb.shape == (5, 12)
    assert [e.doc_id for e in index.entries] == ["a", "b"]
    assert sum(e.count for e in index.entries) == emb.shape[0]

    first_line = (tmp_path / "out.index.jsonl").read_text().splitlines()[0]
    assert first_line.startswith("# ")
    meta = json.loads(first_line[2:])
    assert meta == {"splitter": "regex-v1", "encoder": "hash:12", "min_sentences": 2}


def test_run_extract_is_deterministic(tmp_path):
    raw = tmp_path / "corpus.jsonl"
    _write_lines(raw, [{"doc_id": "a", "label": "x", "text": "One two. Three four."}])
    run_extract(raw, tmp_path / "r1", load_encoder("hash:24"))
    run_extract(raw, tmp_path / "r2", load_encoder("hash:24"))
    assert (tmp_path / "r1.emb").read_bytes() == (tmp_path / "r2.emb").read_bytes()
    assert (tmp_path / "r1.index.jsonl").read_text() == (tmp_path / "r2.index.jsonl").read_text()
