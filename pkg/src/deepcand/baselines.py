"""Comparison mechanisms: truncation + Laplace, word-level metric DP, random guess.

The truncation mechanism clips every sentence embedding into a per-
dimension box fitted on training document embeddings (central coverage
interval, default 75%), averages, and adds Laplace noise with per-
dimension scale d * width / (k * epsilon): noise shrinks inversely with
the sentence count k.

The word mechanism randomizes each token independently in embedding
space, with noise density proportional to exp(-epsilon * l2-norm):
direction uniform on the sphere, magnitude Gamma(shape=d_w, scale=1/eps)
realized as a sum of d_w unit exponentials. The cited construction is not
fully pinned by the source text; this is the standard law, implemented as
a faithful-in-spirit baseline rather than a reproduction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .mathkit import SeededRng, laplace_from_uniform
from .mechanism import PrivacyBudget
from .store import read_embeddings

_WIDTH_MODES = ("per_dim", "max")


@dataclass
class TruncationBox:
    """Per-dimension clipping interval fitted on training embeddings."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=np.float64).reshape(-1)
        hi = np.asarray(self.upper, dtype=np.float64).reshape(-1)
        if lo.shape != hi.shape or lo.size == 0:
            raise ValueError("lower and upper must be matching nonempty vectors")
        if not (np.isfinite(lo).all() and np.isfinite(hi).all()):
            raise ValueError("box bounds must be finite")
        if (lo > hi).any():
            raise ValueError("every lower bound must not exceed its upper bound")
        self.lower, self.upper = lo, hi

    @property
    def widths(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def dim(self) -> int:
        return self.lower.size


def fit_box(train_doc_embeddings, coverage: float = 0.75) -> TruncationBox:
    """Central coverage interval per dimension, linear-interpolated quantiles.

    coverage=0.75 takes [q(0.125), q(0.875)]; coverage=1 takes min/max.
    """
    e = np.asarray(train_doc_embeddings, dtype=np.float64)
    if e.ndim != 2 or e.shape[0] == 0:
        raise ValueError("need a nonempty matrix of training document embeddings")
    if not np.isfinite(e).all():
        raise ValueError("training embeddings must be finite")
    if not (0.0 < coverage <= 1.0):
        raise ValueError("coverage must lie in (0, 1]")
    tail = (1.0 - coverage) / 2.0
    lower = np.quantile(e, tail, axis=0)
    upper = np.quantile(e, 1.0 - tail, axis=0)
    return TruncationBox(lower=lower, upper=upper)


def clip_to_box(matrix, box: TruncationBox) -> np.ndarray:
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[1] != box.dim:
        raise ValueError(f"matrix must be 2-d with {box.dim} columns")
    return np.clip(m, box.lower, box.upper)


def truncation_scales(box: TruncationBox, k: int, budget: PrivacyBudget, width_mode: str = "per_dim") -> np.ndarray:
    """Per-dimension Laplace scale d * w / (k * epsilon).

    width_mode "per_dim" uses each dimension's own width; "max" uses the
    maximal width for every dimension (the source text is ambiguous).
    """
    if width_mode not in _WIDTH_MODES:
        raise ValueError(f"width_mode must be one of {_WIDTH_MODES}")
    if int(k) < 1:
        raise ValueError("k must be at least 1")
    w = box.widths if width_mode == "per_dim" else np.full(box.dim, box.widths.max())
    return box.dim * w / (int(k) * budget.epsilon)


def truncation_mechanism(
    sentences,
    box: TruncationBox,
    budget: PrivacyBudget,
    rng: SeededRng,
    width_mode: str = "per_dim",
) -> np.ndarray:
    """Clip sentences into the box, average, and add per-dimension Laplace noise.

    A zero-width dimension gets exactly zero noise (its scale is zero), so
    a degenerate box returns its center unchanged.
    """
    s = np.asarray(sentences, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] < 1:
        raise ValueError("need a nonempty k x d sentence matrix")
    k = s.shape[0]
    clipped = clip_to_box(s, box)
    mean = clipped.mean(axis=0)
    scales = truncation_scales(box, k, budget, width_mode=width_mode)
    # unit draws scaled per dimension, so zero-width dimensions stay noiseless
    u0 = np.maximum(np.asarray(rng.uniform(box.dim)), 2.0**-53)
    unit = laplace_from_uniform(0.5 - u0, 1.0)
    return mean + scales * unit


@dataclass
class VocabEmbedding:
    """Token vocabulary paired with an embedding matrix, one row per token."""

    tokens: list[str]
    vectors: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != len(self.tokens) or v.shape[0] == 0:
            raise ValueError("need one embedding row per token")
        if not np.isfinite(v).all():
            raise ValueError("token embeddings must be finite")
        if len(set(self.tokens)) != len(self.tokens):
            raise ValueError("tokens must be unique")
        self.vectors = v
        self.index = {tok: i for i, tok in enumerate(self.tokens)}

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def load_vocab(emb_path, tokens_path) -> VocabEmbedding:
    """EMB1 matrix plus a UTF-8 token list, one token per line."""
    vectors = read_embeddings(emb_path)
    tokens = Path(tokens_path).read_text(encoding="utf-8").splitlines()
    tokens = [t for t in tokens if t]
    return VocabEmbedding(tokens=tokens, vectors=vectors)


def nearest_token(vocab: VocabEmbedding, point) -> int:
    """Index of the euclidean-nearest token; ties to the lowest index."""
    z = np.asarray(point, dtype=np.float64).reshape(-1)
    if z.shape != (vocab.dim,):
        raise ValueError(f"point must have dim {vocab.dim}")
    d2 = ((vocab.vectors - z) ** 2).sum(axis=1)
    return int(d2.argmin())


def _mdp_noise(rng: SeededRng, dim: int, epsilon: float) -> np.ndarray:
    direction = rng.normals(dim)
    norm = np.sqrt((direction * direction).sum())
    while norm < 1e-100:
        direction = rng.normals(dim)
        norm = np.sqrt((direction * direction).sum())
    # Gamma(dim, 1/eps) magnitude as a sum of dim unit exponentials
    u = np.asarray(rng.uniform(dim))
    magnitude = float(-np.log1p(-u).sum()) / epsilon
    return magnitude * direction / norm


def word_mdp(document_tokens, vocab: VocabEmbedding, budget: PrivacyBudget, rng: SeededRng) -> list[str]:
    """Randomize each token independently in embedding space.

    Every token's embedding is perturbed with exp(-eps * l2) noise and
    snapped to the nearest vocabulary token. An empty document maps to an
    empty document; unknown tokens are rejected.
    """
    out = []
    for tok in document_tokens:
        if tok not in vocab.index:
            raise ValueError(f"token {tok!r} is not in the vocabulary")
        base = vocab.vectors[vocab.index[tok]]
        noisy = base + _mdp_noise(rng, vocab.dim, budget.epsilon)
        out.append(vocab.tokens[nearest_token(vocab, noisy)])
    return out


def random_guess_score(label_fractions) -> float:
    """Expected macro-agnostic score of guessing by label frequency: sum q_i^2."""
    q = np.asarray(label_fractions, dtype=np.float64)
    if q.ndim != 1 or q.size == 0:
        raise ValueError("label fractions must be a nonempty vector")
    if not np.isfinite(q).all() or (q < 0).any():
        raise ValueError("label fractions must be finite and nonnegative")
    if abs(q.sum() - 1.0) > 1e-9:
        raise ValueError("label fractions must sum to 1")
    return float(q @ q)
