"""On-disk formats: embedding blocks, corpus indexes, selection records.

All formats are little-endian and platform independent.

EMB1 block
    bytes 0-3   magic "EMB1"
    bytes 4-7   version, u32 LE, value 1
    bytes 8-11  n_rows, u32 LE
    bytes 12-15 dim, u32 LE
    then n_rows * dim IEEE-754 binary32 LE values, row major.

Payload precision is binary32 (compact, sufficient for embeddings); all
in-memory arithmetic elsewhere in the package is binary64, so precision
is reduced only at this storage boundary.

Corpus index
    UTF-8 JSON lines, fields exactly {"doc_id": str, "label": str,
    "start": int, "count": int}, mapping each document to a row range
    [start, start + count) of a companion EMB1 block. Blank lines and
    lines starting with '#' are skipped (producers may put a metadata
    comment on the first line).

Selection records
    JSON lines {"doc_id", "chosen_candidate", "utility", "epsilon",
    "seed"}.

Readers validate totally: a malformed input yields an error, never a
partially constructed value. Pure readers are safe for concurrent use;
writers require exclusive access to their sink.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    BadMagicError,
    BadVersionError,
    IndexFormatError,
    NonFiniteError,
    TruncatedPayloadError,
)

_MAGIC = b"EMB1"
_HEADER = struct.Struct("<4sIII")
_U32_MAX = 2**32 - 1


def _as_matrix(matrix) -> np.ndarray:
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"embedding matrix must be 2-dimensional, got shape {m.shape}")
    return m


def write_embeddings(matrix, destination) -> None:
    """Write a matrix as an EMB1 block, byte-exact across platforms.

    Accepts a path or a writable binary file object. Values are stored as
    binary32; the matrix must be finite.
    """
    m = _as_matrix(matrix)
    n_rows, dim = m.shape
    if n_rows > _U32_MAX or dim > _U32_MAX:
        raise ValueError("matrix dimensions exceed the u32 header fields")
    if m.size and not np.isfinite(m).all():
        raise NonFiniteError("refusing to write non-finite embedding values")
    header = _HEADER.pack(_MAGIC, 1, n_rows, dim)
    payload = np.ascontiguousarray(m, dtype="<f4").tobytes()
    if hasattr(destination, "write"):
        destination.write(header)
        destination.write(payload)
    else:
        with open(destination, "wb") as sink:
            sink.write(header)
            sink.write(payload)


def read_embeddings(source) -> np.ndarray:
    """Read an EMB1 block into a float64 matrix.

    Wrong magic, unsupported version, payload length mismatch, and
    non-finite values each raise their own error class.
    """
    if hasattr(source, "read"):
        raw = source.read()
    else:
        raw = Path(source).read_bytes()
    if len(raw) < _HEADER.size:
        raise TruncatedPayloadError(f"EMB1 block shorter than its {_HEADER.size}-byte header")
    magic, version, n_rows, dim = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise BadMagicError(f"expected magic {_MAGIC!r}, found {magic!r}")
    if version != 1:
        raise BadVersionError(f"unsupported EMB1 version {version}")
    expected = n_rows * dim * 4
    actual = len(raw) - _HEADER.size
    if actual != expected:
        raise TruncatedPayloadError(
            f"payload holds {actual} bytes, header promises {expected}"
        )
    flat = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size)
    m = flat.reshape(n_rows, dim).astype(np.float64)
    if m.size and not np.isfinite(m).all():
        raise NonFiniteError("EMB1 payload contains NaN or infinite values")
    return m


@dataclass
class DocEntry:
    """One document's row range inside a companion embedding matrix."""

    doc_id: str
    label: str
    start: int
    count: int


@dataclass
class CorpusIndex:
    """Validated sequence of document entries with disjoint row ranges."""

    entries: list[DocEntry] = field(default_factory=list)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def labels(self) -> list[str]:
        """Distinct labels in sorted order; positions define class ids."""
        return sorted({e.label for e in self.entries})

    def class_ids(self) -> np.ndarray:
        """Numeric class id per entry, assigned by sorted label order."""
        order = {lab: i for i, lab in enumerate(self.labels())}
        return np.array([order[e.label] for e in self.entries], dtype=np.int64)


_INDEX_FIELDS = {"doc_id", "label", "start", "count"}


def _parse_index_line(line: str, lineno: int) -> DocEntry:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise IndexFormatError(f"line {lineno}: not valid JSON ({exc.msg})") from None
    if not isinstance(obj, dict) or set(obj) != _INDEX_FIELDS:
        raise IndexFormatError(
            f"line {lineno}: fields must be exactly doc_id, label, start, count"
        )
    if not isinstance(obj["doc_id"], str) or not isinstance(obj["label"], str):
        raise IndexFormatError(f"line {lineno}: doc_id and label must be strings")
    for key in ("start", "count"):
        if isinstance(obj[key], bool) or not isinstance(obj[key], int):
            raise IndexFormatError(f"line {lineno}: {key} must be an integer")
    if obj["start"] < 0:
        raise IndexFormatError(f"line {lineno}: start must be nonnegative")
    if obj["count"] < 1:
        raise IndexFormatError(f"line {lineno}: count must be at least 1")
    return DocEntry(obj["doc_id"], obj["label"], obj["start"], obj["count"])


def read_index(source, n_rows: int | None = None) -> CorpusIndex:
    """Parse and validate a corpus index.

    Rejects malformed lines (reporting the line number), overlapping
    ranges, and, when n_rows is given, ranges outside the matrix.
    """
    if hasattr(source, "read"):
        text = source.read()
        if isinstance(text, bytes):
            text = text.decode("utf-8")
    else:
        text = Path(source).read_text(encoding="utf-8")
    entries = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        entries.append(_parse_index_line(stripped, lineno))
    by_start = sorted(entries, key=lambda e: e.start)
    for prev, cur in zip(by_start, by_start[1:]):
        if cur.start < prev.start + prev.count:
            raise IndexFormatError(
                f"ranges overlap: doc {prev.doc_id!r} [{prev.start},{prev.start + prev.count})"
                f" and doc {cur.doc_id!r} [{cur.start},{cur.start + cur.count})"
            )
    if n_rows is not None:
        for e in entries:
            if e.start + e.count > n_rows:
                raise IndexFormatError(
                    f"doc {e.doc_id!r} range [{e.start},{e.start + e.count})"
                    f" exceeds the {n_rows}-row matrix"
                )
    return CorpusIndex(entries)


def write_index(index: CorpusIndex, sink) -> None:
    lines = [
        json.dumps(
            {"doc_id": e.doc_id, "label": e.label, "start": e.start, "count": e.count}
        )
        for e in index.entries
    ]
    text = "".join(line + "\n" for line in lines)
    if hasattr(sink, "write"):
        sink.write(text)
    else:
        Path(sink).write_text(text, encoding="utf-8")


@dataclass
class SelectionRecord:
    """One privatized document: the candidate index the mechanism chose."""

    doc_id: str
    chosen_candidate: int
    utility: float
    epsilon: float
    seed: int

    def __post_init__(self):
        if self.chosen_candidate < 0:
            raise ValueError("chosen_candidate must be a nonnegative index")
        if not (np.isfinite(self.epsilon) and self.epsilon > 0):
            raise ValueError("epsilon must be finite and positive")


def write_selections(records, sink) -> None:
    lines = [
        json.dumps(
            {
                "doc_id": r.doc_id,
                "chosen_candidate": int(r.chosen_candidate),
                "utility": float(r.utility),
                "epsilon": float(r.epsilon),
                "seed": int(r.seed),
            }
        )
        for r in records
    ]
    text = "".join(line + "\n" for line in lines)
    if hasattr(sink, "write"):
        sink.write(text)
    else:
        Path(sink).write_text(text, encoding="utf-8")


def read_selections(source) -> list[SelectionRecord]:
    if hasattr(source, "read"):
        text = source.read()
        if isinstance(text, bytes):
            text = text.decode("utf-8")
    else:
        text = Path(source).read_text(encoding="utf-8")
    records = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        try:
            obj = json.loads(stripped)
            records.append(
                SelectionRecord(
                    doc_id=obj["doc_id"],
                    chosen_candidate=int(obj["chosen_candidate"]),
                    utility=float(obj["utility"]),
                    epsilon=float(obj["epsilon"]),
                    seed=int(obj["seed"]),
                )
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise IndexFormatError(f"selection line {lineno}: {exc}") from None
    return records


@dataclass
class Corpus:
    """An embedding matrix paired with its validated index."""

    embeddings: np.ndarray
    index: CorpusIndex

    def __post_init__(self):
        self.embeddings = _as_matrix(self.embeddings)
        n_rows = self.embeddings.shape[0]
        for e in self.index.entries:
            if e.start + e.count > n_rows:
                raise IndexFormatError(
                    f"doc {e.doc_id!r} range exceeds the {n_rows}-row matrix"
                )

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]

    @property
    def n_docs(self) -> int:
        return len(self.index.entries)

    def doc_sentences(self, entry: DocEntry) -> np.ndarray:
        return self.embeddings[entry.start : entry.start + entry.count]


def load_corpus(emb_path, index_path) -> Corpus:
    """Read an EMB1 block plus its index, cross-validating ranges."""
    matrix = read_embeddings(emb_path)
    index = read_index(index_path, n_rows=matrix.shape[0])
    return Corpus(embeddings=matrix, index=index)


def embeddings_bytes(matrix) -> bytes:
    """The exact EMB1 byte string for a matrix (testing convenience)."""
    buf = io.BytesIO()
    write_embeddings(matrix, buf)
    return buf.getvalue()
