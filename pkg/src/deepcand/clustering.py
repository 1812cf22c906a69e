"""Seeded k-means (Lloyd iterations from k-means++ starts).

Used to derive the n_c cluster targets that recoder training predicts.
Distances are exact squared Euclidean computed in blocks; assignment ties
go to the lowest center index, and the whole fit is deterministic given
(seed, data).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .mathkit import SeededRng, sample_categorical
from .store import read_embeddings, write_embeddings


@dataclass
class KMeansModel:
    n_clusters: int
    centers: np.ndarray = field(repr=False)
    inertia: float
    # inertia after every assignment pass, for monotonicity checks
    inertia_history: list = field(default_factory=list, repr=False)
    # fit-time labels of the training points
    labels: np.ndarray | None = field(default=None, repr=False)


def _sq_dists(points: np.ndarray, centers: np.ndarray, block: int = 512) -> np.ndarray:
    # exact differences, chunked over rows to bound memory
    n = points.shape[0]
    out = np.empty((n, centers.shape[0]), dtype=np.float64)
    for lo in range(0, n, block):
        hi = min(lo + block, n)
        diff = points[lo:hi, None, :] - centers[None, :, :]
        out[lo:hi] = (diff * diff).sum(axis=2)
    return out


def _plus_plus_init(points: np.ndarray, k: int, rng: SeededRng) -> np.ndarray:
    n = points.shape[0]
    chosen = [sample_categorical(rng, np.ones(n))]
    d2 = ((points - points[chosen[0]]) ** 2).sum(axis=1)
    while len(chosen) < k:
        if d2.max() <= 0.0:
            # the rest coincide with chosen centers; take any unchosen point
            taken = set(chosen)
            remaining = np.array([i for i in range(n) if i not in taken])
            nxt = int(remaining[sample_categorical(rng, np.ones(remaining.size))])
        else:
            nxt = sample_categorical(rng, d2)
        chosen.append(nxt)
        d2 = np.minimum(d2, ((points - points[nxt]) ** 2).sum(axis=1))
    return points[np.array(chosen)].copy()


def fit_kmeans(points, n_clusters: int, rng: SeededRng, max_iters: int = 100, tol: float = 1e-6) -> KMeansModel:
    """Lloyd iterations from a seeded k-means++ initialization.

    Stops when every center moves less than tol (Euclidean) or after
    max_iters. Inertia is nonincreasing across iterations; an empty
    cluster is reseeded at the point farthest from its assigned center,
    which cannot increase the next assignment's inertia.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise ValueError("points must be a nonempty 2-dimensional matrix")
    if not np.isfinite(pts).all():
        raise ValueError("points must be finite")
    k = int(n_clusters)
    n = pts.shape[0]
    if k < 1 or k > n:
        raise ValueError(f"n_clusters must lie in [1, {n}], got {k}")

    centers = _plus_plus_init(pts, k, rng)
    history = []
    for _ in range(int(max_iters)):
        d2 = _sq_dists(pts, centers)
        labels = d2.argmin(axis=1)
        history.append(float(d2[np.arange(n), labels].sum()))

        new_centers = centers.copy()
        for c in range(k):
            mask = labels == c
            if mask.any():
                new_centers[c] = pts[mask].mean(axis=0)
        empties = np.flatnonzero(np.bincount(labels, minlength=k) == 0)
        if empties.size:
            own = d2[np.arange(n), labels]
            farthest = np.argsort(-own)
            for c, pi in zip(empties, farthest):
                new_centers[c] = pts[pi]

        shift = np.sqrt(((new_centers - centers) ** 2).sum(axis=1)).max()
        centers = new_centers
        if shift < tol:
            break

    d2 = _sq_dists(pts, centers)
    labels = d2.argmin(axis=1)
    inertia = float(d2[np.arange(n), labels].sum())
    history.append(inertia)
    return KMeansModel(
        n_clusters=k,
        centers=centers,
        inertia=inertia,
        inertia_history=history,
        labels=labels,
    )


def assign(model: KMeansModel, points) -> np.ndarray:
    """Nearest-center label per point; ties to the lowest center index."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise ValueError("points must be a 2-dimensional matrix")
    if pts.shape[1] != model.centers.shape[1]:
        raise ValueError(
            f"points have dim {pts.shape[1]}, centers have dim {model.centers.shape[1]}"
        )
    return _sq_dists(pts, model.centers).argmin(axis=1)


def save_kmeans(model: KMeansModel, directory) -> None:
    """Persist centers as an EMB1 block plus a JSON sidecar."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_embeddings(model.centers, d / "centers.emb")
    meta = {"n_clusters": model.n_clusters, "inertia": model.inertia}
    (d / "kmeans.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")


def load_kmeans(directory) -> KMeansModel:
    d = Path(directory)
    centers = read_embeddings(d / "centers.emb")
    meta = json.loads((d / "kmeans.json").read_text(encoding="utf-8"))
    return KMeansModel(
        n_clusters=int(meta["n_clusters"]),
        centers=centers,
        inertia=float(meta["inertia"]),
    )
