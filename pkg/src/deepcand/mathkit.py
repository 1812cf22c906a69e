"""Deterministic seeded randomness and sampling primitives.

Every random choice in this package flows through :class:`SeededRng`, a
counter-based Philox generator addressed by a 64-bit seed plus a stream
label, so distinct concerns (projections, mechanism draws, baselines)
never share a stream and results are bit-reproducible per (seed, stream)
on any platform.

Distribution transforms are written out explicitly rather than delegated
to library samplers, so the exact draw sequence is documented:

* standard normals: Box-Muller, basic form, cosine branch only, with the
  log argument mapped into (0, 1];
* Laplace: inverse CDF ``x = -b * sgn(u) * ln(1 - 2|u|)`` for u in
  (-1/2, 1/2];
* categorical: single uniform inverted through the cumulative sum;
* unit sphere: normalized independent Gaussians.

This module provides statistical reproducibility, not cryptographic
randomness, and does not defend against floating-point side channels
(snapping, discrete noise); that is a documented limitation.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

_MASK64 = (1 << 64) - 1


def derive_seed(seed: int, label: str) -> int:
    """Derive a 64-bit sub-seed from a master seed and a text label.

    Used wherever a family of runs needs per-item seeds (one per document,
    one per trial) that are stable across corpus order and thread count.
    """
    payload = (int(seed) & _MASK64).to_bytes(8, "little") + label.encode("utf-8")
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "little")


def _stream_entropy(stream_id: str) -> list[int]:
    # 128 bits of label entropy folded into the seed sequence as 32-bit words
    digest = hashlib.blake2b(stream_id.encode("utf-8"), digest_size=16).digest()
    return [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]


class SeededRng:
    """Counter-based pseudorandom stream addressed by (seed, stream_id).

    Identical (seed, stream_id, call sequence) produces identical outputs
    regardless of platform or thread count. Child streams derived with
    distinct labels are statistically independent of the parent and of
    each other. A SeededRng value is single-owner: parallel work should
    derive its child streams up front.
    """

    def __init__(self, seed: int, stream_id: str = "root"):
        if not isinstance(stream_id, str):
            raise ValueError("stream_id must be a string")
        self.seed = int(seed) & _MASK64
        self.stream_id = stream_id
        entropy = [self.seed, *_stream_entropy(stream_id)]
        self._gen = np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))

    def child(self, label: str) -> "SeededRng":
        """Independent sub-stream for the given label."""
        return SeededRng(self.seed, self.stream_id + "/" + label)

    def uniform(self, size=None):
        """Uniform draws on [0, 1) with 53-bit resolution."""
        return self._gen.random(size)

    def normals(self, shape) -> np.ndarray:
        """Standard normal draws via Box-Muller (cosine branch).

        u1 is reflected to (0, 1] so the logarithm never sees zero; each
        output consumes exactly two uniforms.
        """
        if isinstance(shape, (int, np.integer)):
            shape = (int(shape),)
        n = int(np.prod(shape)) if len(shape) else 1
        u1 = 1.0 - self.uniform(n)
        u2 = self.uniform(n)
        z = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
        return z.reshape(shape)

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates permutation of range(n)."""
        out = np.arange(int(n))
        for i in range(int(n) - 1, 0, -1):
            j = int(self.uniform() * (i + 1))
            out[i], out[j] = out[j], out[i]
        return out

    def choice(self, n: int, size: int) -> np.ndarray:
        """`size` distinct indices from range(n), partial Fisher-Yates."""
        n, size = int(n), int(size)
        if size < 0 or size > n:
            raise ValueError(f"cannot draw {size} distinct items from {n}")
        pool = np.arange(n)
        for i in range(size):
            j = i + int(self.uniform() * (n - i))
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:size].copy()


@dataclass
class ProjectionSet:
    """p unit-norm direction vectors in R^dim, one per matrix row."""

    p: int
    dim: int
    vectors: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.float64)
        if v.shape != (self.p, self.dim):
            raise ValueError(f"vectors shape {v.shape} does not match ({self.p}, {self.dim})")
        if not np.isfinite(v).all():
            raise ValueError("projection vectors must be finite")
        norms = np.sqrt((v * v).sum(axis=1))
        if norms.size and np.abs(norms - 1.0).max() > 1e-12:
            raise ValueError("every projection row must have unit norm (within 1e-12)")
        self.vectors = v


def sample_unit_sphere(rng: SeededRng, dim: int, p: int) -> ProjectionSet:
    """Draw p directions uniformly on the unit sphere in R^dim.

    Each direction is a vector of independent standard Gaussians scaled to
    unit norm. Rows whose norm underflows (probability ~0) are redrawn so
    the unit-norm invariant holds unconditionally.
    """
    dim, p = int(dim), int(p)
    if dim < 1 or p < 1:
        raise ValueError("dim and p must both be at least 1")
    vecs = rng.normals((p, dim))
    norms = np.sqrt((vecs * vecs).sum(axis=1))
    while True:
        degenerate = norms < 1e-100
        if not degenerate.any():
            break
        vecs[degenerate] = rng.normals((int(degenerate.sum()), dim))
        norms = np.sqrt((vecs * vecs).sum(axis=1))
    return ProjectionSet(p=p, dim=dim, vectors=vecs / norms[:, None])


def laplace_from_uniform(u, scale: float):
    """Inverse-CDF transform for the zero-mean Laplace distribution.

    Maps u in (-1/2, 1/2] to -scale * sgn(u) * ln(1 - 2|u|). Exposed
    separately from the sampler so the transform itself is testable
    against closed-form values.
    """
    if not np.isfinite(scale) or scale <= 0:
        raise ValueError("scale must be positive and finite")
    u = np.asarray(u, dtype=np.float64)
    if np.any(np.abs(u) > 0.5):
        raise ValueError("u must lie in (-1/2, 1/2]")
    return -scale * np.sign(u) * np.log1p(-2.0 * np.abs(u))


def sample_laplace(rng: SeededRng, scale: float, size=None):
    """Zero-mean Laplace draws with the given scale (variance 2*scale^2).

    The source uniform U in [0, 1) is clamped away from 0 by one ulp so
    the mapped u = 1/2 - U stays strictly inside (-1/2, 1/2) and every
    draw is finite.
    """
    u0 = np.maximum(np.asarray(rng.uniform(size), dtype=np.float64), 2.0**-53)
    out = laplace_from_uniform(0.5 - u0, scale)
    if size is None:
        return float(out)
    return out


def sample_categorical(rng: SeededRng, weights, size=None):
    """Draw an index with probability proportional to nonnegative weights.

    Inversion by binary search over the cumulative sum in binary64. A
    weight of exactly zero is never selected, including at the cumulative
    boundaries.

    Args:
      rng: source stream; consumes one uniform per draw.
      weights: nonempty vector, all finite, all >= 0, at least one > 0.
      size: None for a single int, else an array of that many indices.
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("weights must be a nonempty one-dimensional vector")
    if not np.isfinite(w).all():
        raise ValueError("weights must be finite")
    if (w < 0).any():
        raise ValueError("weights must be nonnegative")
    cum = np.cumsum(w)
    if cum[-1] <= 0.0:
        raise ValueError("at least one weight must be strictly positive")
    positive = np.flatnonzero(w > 0)
    u = np.asarray(rng.uniform(size), dtype=np.float64)
    idx = np.searchsorted(cum, u * cum[-1], side="right")
    # float roundup at the top end could land past the last positive cell
    idx = np.minimum(idx, positive[-1])
    if size is None:
        return int(idx)
    return idx.astype(np.int64)


def log_softmax(log_weights) -> np.ndarray:
    """log of the normalized exponentials, stable under large magnitudes."""
    lw = np.asarray(log_weights, dtype=np.float64)
    if lw.ndim != 1 or lw.size == 0:
        raise ValueError("log_weights must be a nonempty vector")
    if not np.isfinite(lw).all():
        raise ValueError("log_weights must be finite")
    m = lw.max()
    return lw - (m + np.log(np.exp(lw - m).sum()))


def logsumexp_normalize(log_weights) -> np.ndarray:
    """exp(log_weights) normalized to a probability vector without overflow.

    Returns exp(l_i - max) / sum_j exp(l_j - max); the result sums to 1
    within 1e-12 and is exactly invariant under shifts l -> l + c whenever
    the shifted values are representable.
    """
    lw = np.asarray(log_weights, dtype=np.float64)
    if lw.ndim != 1 or lw.size == 0:
        raise ValueError("log_weights must be a nonempty vector")
    if not np.isfinite(lw).all():
        raise ValueError("log_weights must be finite")
    e = np.exp(lw - lw.max())
    return e / e.sum()
