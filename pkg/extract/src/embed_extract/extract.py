"""Turn raw JSON-lines corpora into embedding blocks plus document indexes.

Input is one JSON object per line with doc_id, label, and text fields.
Output is a binary embedding block (magic EMB1, version, rows, dim, then
float32 row-major payload) and a JSON-lines index whose first line is a
metadata comment recording the splitter version, the encoder identity,
and the sentence threshold.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .splitter import SPLITTER_VERSION, split_sentences


class CorpusFormatError(ValueError):
    """Raw corpus line failed validation; the message names the line."""


class EmptyCorpusError(ValueError):
    """No documents survived parsing and filtering."""


@dataclass
class RawDoc:
    doc_id: str
    label: str
    text: str


@dataclass
class ExtractResult:
    matrix: np.ndarray = field(repr=False)
    entries: list[dict]
    dropped: list[tuple[str, int]]


def read_raw_corpus(path) -> list[RawDoc]:
    """Parse JSON lines into documents; blank and '#' comment lines skipped."""
    docs = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            try:
                obj = json.loads(stripped)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"line {lineno}: not valid JSON ({exc})") from None
            if not isinstance(obj, dict):
                raise CorpusFormatError(f"line {lineno}: expected a JSON object")
            for key in ("doc_id", "label", "text"):
                if not isinstance(obj.get(key), str):
                    raise CorpusFormatError(f"line {lineno}: missing string field {key!r}")
            if not obj["text"].strip():
                raise CorpusFormatError(f"line {lineno}: empty text for {obj['doc_id']!r}")
            if obj["doc_id"] in seen:
                raise CorpusFormatError(f"line {lineno}: duplicate doc_id {obj['doc_id']!r}")
            seen.add(obj["doc_id"])
            docs.append(RawDoc(obj["doc_id"], obj["label"], obj["text"]))
    if not docs:
        raise EmptyCorpusError(f"no documents in {path}")
    return docs


def extract_corpus(docs, encoder, min_sentences: int = 2, log=None) -> ExtractResult:
    """Split and encode each document, dropping ones below the sentence floor."""
    if int(min_sentences) < 1:
        raise ValueError("min_sentences must be at least 1")
    blocks, entries, dropped = [], [], []
    start = 0
    for doc in docs:
        sentences = split_sentences(doc.text)
        if len(sentences) < min_sentences:
            dropped.append((doc.doc_id, len(sentences)))
            if log is not None:
                log(
                    f"dropped {doc.doc_id}: {len(sentences)} sentence(s), "
                    f"need {min_sentences}"
                )
            continue
        blocks.append(encoder.encode(sentences))
        entries.append(
            {"doc_id": doc.doc_id, "label": doc.label, "start": start, "count": len(sentences)}
        )
        start += len(sentences)
    if not entries:
        raise EmptyCorpusError("every document fell below the sentence threshold")
    return ExtractResult(matrix=np.concatenate(blocks, axis=0), entries=entries, dropped=dropped)


def write_embedding_block(matrix, path) -> None:
    """Binary layout: <4sIII header (magic, version, rows, dim), float32 LE payload."""
    m = np.ascontiguousarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] == 0 or m.shape[1] == 0:
        raise ValueError("matrix must be 2-d and nonempty")
    if not np.isfinite(m).all():
        raise ValueError("matrix must be finite")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sIII", b"EMB1", 1, m.shape[0], m.shape[1]))
        fh.write(m.astype("<f4").tobytes(order="C"))


def write_index_file(entries, path, metadata: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# " + json.dumps(metadata, sort_keys=True) + "\n")
        for e in entries:
            fh.write(json.dumps(e) + "\n")


def run_extract(in_path, out_prefix, encoder, min_sentences: int = 2, log=None) -> dict:
    """Full pipeline: read, split, encode, write prefix.emb + prefix.index.jsonl."""
    docs = read_raw_corpus(in_path)
    result = extract_corpus(docs, encoder, min_sentences=min_sentences, log=log)
    out_prefix = str(out_prefix)
    write_embedding_block(result.matrix, out_prefix + ".emb")
    metadata = {
        "splitter": SPLITTER_VERSION,
        "encoder": encoder.identity,
        "min_sentences": int(min_sentences),
    }
    write_index_file(result.entries, out_prefix + ".index.jsonl", metadata)
    return {
        "documents": len(result.entries),
        "sentences": int(result.matrix.shape[0]),
        "dim": int(result.matrix.shape[1]),
        "dropped": len(result.dropped),
    }
