"""Sentence-private document embeddings.

A document is summarized by one of m candidate embeddings, drawn with
probability exponentially tilted toward high approximate Tukey depth
within the document's sentence cloud. Swapping any single sentence
moves each candidate's depth by at most one, so the draw satisfies
the epsilon guarantee at sentence granularity.
"""

from .errors import (
    BadMagicError,
    BadVersionError,
    DeepcandError,
    FormatError,
    IndexFormatError,
    NonFiniteError,
    TruncatedPayloadError,
)
from .mathkit import SeededRng, derive_seed, sample_unit_sphere
from .mechanism import (
    PrivacyBudget,
    SelectionDistribution,
    audit_group,
    audit_pair,
    select_private_embedding,
    selection_distribution,
)
from .store import (
    Corpus,
    CorpusIndex,
    DocEntry,
    SelectionRecord,
    load_corpus,
    read_embeddings,
    read_index,
    write_embeddings,
    write_index,
)
from .tukey import approx_depth, deepest_candidate, exact_depth_2d

__version__ = "0.1.0"

__all__ = [
    "BadMagicError",
    "BadVersionError",
    "Corpus",
    "CorpusIndex",
    "DeepcandError",
    "DocEntry",
    "FormatError",
    "IndexFormatError",
    "NonFiniteError",
    "PrivacyBudget",
    "SeededRng",
    "SelectionDistribution",
    "SelectionRecord",
    "TruncatedPayloadError",
    "approx_depth",
    "audit_group",
    "audit_pair",
    "deepest_candidate",
    "derive_seed",
    "exact_depth_2d",
    "load_corpus",
    "read_embeddings",
    "read_index",
    "sample_unit_sphere",
    "select_private_embedding",
    "selection_distribution",
    "write_embeddings",
    "write_index",
    "__version__",
]
