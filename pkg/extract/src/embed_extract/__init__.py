"""Sentence extraction and encoding for raw text corpora.

Splits each document into sentences, encodes them with a deterministic
hashing encoder (or a pretrained sentence-transformers model), and
writes an EMB1 embedding block plus a JSON-lines document index.
"""

from .encoders import EncoderLoadError, HashEncoder, SbertEncoder, load_encoder
from .extract import (
    CorpusFormatError,
    EmptyCorpusError,
    ExtractResult,
    RawDoc,
    extract_corpus,
    read_raw_corpus,
    run_extract,
    write_embedding_block,
    write_index_file,
)
from .splitter import SPLITTER_VERSION, split_sentences

__version__ = "0.1.0"

__all__ = [
    "CorpusFormatError",
    "EmptyCorpusError",
    "EncoderLoadError",
    "ExtractResult",
    "HashEncoder",
    "RawDoc",
    "SPLITTER_VERSION",
    "SbertEncoder",
    "extract_corpus",
    "load_encoder",
    "read_raw_corpus",
    "run_extract",
    "split_sentences",
    "write_embedding_block",
    "write_index_file",
]
