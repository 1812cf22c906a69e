"""Halfspace depth of candidate points under random one-dimensional projections.

For a document of k sentence embeddings and a candidate f, each projection
direction v gives a count h = #{sentences whose projection is >= the
candidate's projection} (ties count into h). The candidate's depth on that
projection is min(h, k - h), an integer in [0, floor(k/2)], and the
projections are aggregated into a single integer utility.

Two aggregation rules are supported:

* "min" (default): the lowest per-projection depth. This is the tighter
  upper bound on the true halfspace depth and is what the depth sweep
  below is validated against.
* "max": the highest per-projection depth, equivalently the literal
  arg-form max_j -|h_j - k/2| shifted into [0, floor(k/2)].

Both rules change by at most 1 when exactly one sentence row is replaced,
because each h_j changes by at most 1; that bounded sensitivity is what
the selection mechanism's privacy proof needs, so the rule choice never
affects the privacy guarantee.

Tie caveat: because ties count into h, a candidate exactly equal to every
sentence scores h = k and per-projection depth 0, below its true closed-
halfspace depth. The upper-bound property against exact_depth_2d therefore
holds for continuous (tie-free) data, where exact coincidences have
measure zero.

No randomness lives in this module; projection sets are inputs. All
functions are pure, and per-candidate work is order-independent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mathkit import ProjectionSet

_RULES = ("min", "max")


@dataclass
class DepthReport:
    """Per-candidate depth diagnostics across all projections."""

    candidate: int
    per_projection_h: np.ndarray
    per_projection_depth: np.ndarray
    depth: int


def _check_rule(rule: str) -> str:
    if rule not in _RULES:
        raise ValueError(f"aggregation rule must be one of {_RULES}, got {rule!r}")
    return rule


def project_all(points, projections: ProjectionSet) -> np.ndarray:
    """Inner products of each point with each direction, an n x p matrix."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise ValueError("points must be a 2-dimensional matrix")
    if pts.shape[1] != projections.dim:
        raise ValueError(
            f"points have dim {pts.shape[1]}, projections expect {projections.dim}"
        )
    return pts @ projections.vectors.T


def depth_counts(candidates, sentences, projections: ProjectionSet) -> np.ndarray:
    """The m x p matrix of counts h[i, j] = #{l : s_l^j >= f_i^j}.

    Computed per projection by binary search into the sorted sentence
    projections; ties (equal projected values) count into h.
    """
    cand_proj = project_all(candidates, projections)
    sent_proj = project_all(sentences, projections)
    k = sent_proj.shape[0]
    if k == 0:
        raise ValueError("sentence set must be nonempty")
    sorted_proj = np.sort(sent_proj, axis=0)
    h = np.empty(cand_proj.shape, dtype=np.int64)
    for j in range(projections.p):
        # count of sentences strictly below the candidate, complemented
        below = np.searchsorted(sorted_proj[:, j], cand_proj[:, j], side="left")
        h[:, j] = k - below
    return h


def depth_utilities(candidates, sentences, projections: ProjectionSet, rule: str = "min") -> np.ndarray:
    """Integer depth utility per candidate under the given aggregation rule."""
    _check_rule(rule)
    h = depth_counts(candidates, sentences, projections)
    k = np.asarray(sentences).shape[0]
    per_proj = np.minimum(h, k - h)
    if rule == "min":
        return per_proj.min(axis=1)
    return per_proj.max(axis=1)


def approx_depth(candidates, sentences, projections: ProjectionSet, rule: str = "min") -> list[DepthReport]:
    """Full depth reports for every candidate.

    Args:
      candidates: m x d matrix of candidate embeddings.
      sentences: k x d matrix of one document's sentence embeddings.
      projections: the shared projection directions.
      rule: "min" or "max" aggregation over projections.

    Returns:
      One DepthReport per candidate, in candidate order. Total work is
      O(p (m + k) log k), within the O(mkp) budget.
    """
    _check_rule(rule)
    h = depth_counts(candidates, sentences, projections)
    k = np.asarray(sentences).shape[0]
    per_proj = np.minimum(h, k - h)
    agg = per_proj.min(axis=1) if rule == "min" else per_proj.max(axis=1)
    return [
        DepthReport(
            candidate=i,
            per_projection_h=h[i],
            per_projection_depth=per_proj[i],
            depth=int(agg[i]),
        )
        for i in range(h.shape[0])
    ]


def deepest_candidate(reports: list[DepthReport]) -> int:
    """Index of the maximal-depth report; ties go to the lowest index."""
    if not reports:
        raise ValueError("need at least one depth report")
    best = 0
    for i, rep in enumerate(reports):
        if rep.depth > reports[best].depth:
            best = i
    return best


def exact_depth_2d(query, points) -> int:
    """Exact halfspace depth of a 2-d query point over a finite point set.

    Returns min over all directions w of #{y : w . (y - query) >= 0}. The
    count, as a function of the direction angle, only changes at angles
    orthogonal to some y - query, so it suffices to evaluate the midpoints
    between consecutive critical angles (each critical angle perturbed to
    both sides); points coincident with the query lie in every closed
    halfplane and always count.
    """
    q = np.asarray(query, dtype=np.float64).reshape(-1)
    pts = np.asarray(points, dtype=np.float64)
    if q.shape != (2,) or pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("exact depth oracle requires dim = 2")
    diffs = pts - q
    nonzero = diffs[np.any(diffs != 0.0, axis=1)]
    coincident = pts.shape[0] - nonzero.shape[0]
    if nonzero.shape[0] == 0:
        return coincident
    angles = np.arctan2(nonzero[:, 1], nonzero[:, 0])
    critical = np.concatenate([angles + np.pi / 2.0, angles - np.pi / 2.0])
    critical = np.unique(np.mod(critical, 2.0 * np.pi))
    # midpoints of consecutive critical angles, wrapping around the circle
    nxt = np.roll(critical, -1).copy()
    nxt[-1] += 2.0 * np.pi
    mids = (critical + nxt) / 2.0
    if mids.size == 1:
        mids = np.array([critical[0] + np.pi])
    directions = np.stack([np.cos(mids), np.sin(mids)], axis=1)
    counts = (directions @ nonzero.T >= 0.0).sum(axis=1)
    return int(counts.min()) + coincident
