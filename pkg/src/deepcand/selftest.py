"""Quick property suite behind the `deepcand selftest` subcommand.

Runs trimmed versions of the package's core checks (the full versions
live in the test suite) and reports one PASS/FAIL line each.
"""

from __future__ import annotations

import numpy as np

from . import baselines, clustering, mechanism, neural, synth, tukey
from .mathkit import (
    SeededRng,
    laplace_from_uniform,
    logsumexp_normalize,
    sample_categorical,
    sample_laplace,
    sample_unit_sphere,
)


def _check_condition_table():
    budget_rows = mechanism.TABLE1_ROWS
    for eps, b, jstar in budget_rows:
        prob = mechanism.check_table1(5000, b, jstar, mechanism.PrivacyBudget(eps))
        # independent direct summation of the two-spike distribution
        direct = (b * np.exp(eps * jstar / 2.0)) / (
            b * np.exp(eps * jstar / 2.0) + (5000 - b) * np.exp(0.0)
        )
        assert abs(prob - direct) < 1e-12, f"row {(eps, b, jstar)}: {prob} vs {direct}"
        assert prob >= 0.95, f"row {(eps, b, jstar)} fell below 0.95: {prob}"


def _check_sphere():
    proj = sample_unit_sphere(SeededRng(7, "selftest-sphere"), 50, 200)
    norms = np.sqrt((proj.vectors**2).sum(axis=1))
    assert np.abs(norms - 1.0).max() <= 1e-12
    one_d = sample_unit_sphere(SeededRng(7, "selftest-1d"), 1, 64)
    assert set(np.unique(one_d.vectors)) <= {-1.0, 1.0}


def _check_laplace():
    assert abs(laplace_from_uniform(0.25, 1.0) - 0.6931471805599453) < 1e-12
    draws = sample_laplace(SeededRng(11, "selftest-lap"), 2.0, size=100_000)
    assert abs(draws.std() / (2.0 * np.sqrt(2.0)) - 1.0) < 0.02


def _check_categorical():
    rng = SeededRng(3, "selftest-cat")
    assert all(sample_categorical(rng, [1.0]) == 0 for _ in range(10))
    draws = sample_categorical(rng, [0.0, 1.0, 0.0, 2.0], size=10_000)
    assert set(np.unique(draws)) <= {1, 3}


def _check_logsumexp():
    np.testing.assert_allclose(logsumexp_normalize([0.0, 0.0]), [0.5, 0.5], atol=1e-15)
    base = np.array([1.0, 4.0, 2.0, 0.0])
    assert np.array_equal(logsumexp_normalize(base), logsumexp_normalize(base + 100.0))


def _check_depth_hand_cases():
    proj = tukey.ProjectionSet(p=1, dim=1, vectors=np.array([[1.0]]))
    sentences = np.array([[0.0], [1.0], [2.0], [3.0]])
    reports = tukey.approx_depth(np.array([[1.5], [10.0], [3.0]]), sentences, proj)
    assert [r.depth for r in reports] == [2, 0, 1]
    corners = np.array([[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]])
    assert tukey.exact_depth_2d(np.zeros(2), corners) == 2


def _check_sensitivity():
    rng = SeededRng(5, "selftest-sens")
    proj = sample_unit_sphere(rng.child("proj"), 4, 9)
    for i in range(200):
        trng = rng.child(f"t{i}")
        x = trng.normals((7, 4))
        x_prime = synth.neighbor_variant(trng, x, "random")
        cand = trng.normals((15, 4))
        for rule in ("min", "max"):
            du = np.abs(
                tukey.depth_utilities(cand, x, proj, rule=rule)
                - tukey.depth_utilities(cand, x_prime, proj, rule=rule)
            )
            assert du.max() <= 1, f"sensitivity breach at trial {i} with rule {rule}"


def _check_audit():
    results = synth.audit_sweep(seed=1, pairs_per_kind=10, p=8, group_pairs=5)
    for row in results:
        assert row["ratio"] <= row["bound"], row


def _check_kmeans():
    pts = np.array([[0.0, 0.0], [0.0, 2.0], [10.0, 0.0], [10.0, 2.0]])
    model = clustering.fit_kmeans(pts, 2, SeededRng(2, "selftest-km"))
    got = sorted(model.centers.tolist())
    assert got == [[0.0, 1.0], [10.0, 1.0]], got
    assert abs(model.inertia - 4.0) < 1e-12


def _check_gradients():
    rng = SeededRng(13, "selftest-grad")
    model = neural.Mlp([5, 6, 6, 6, 3], rng=rng.child("init"))
    # nudge biases off zero: zero biases let a dead batch row land later
    # preactivations exactly on the rectifier kink, where central
    # differences and the subgradient legitimately disagree
    jitter = rng.child("jitter")
    for b in model.biases:
        b += 0.1 * jitter.normals((b.size,)).reshape(b.shape)
    x = rng.child("x").normals((8, 5))
    y = (np.arange(8) % 3).astype(np.int64)
    _, cache = model.forward_cached(x)
    margin = min(np.abs(z).min() for _, z in cache[1:])
    # perturbations move z by O(h) with h=1e-5; 2e-4 keeps every kink far
    assert margin > 2e-4, f"fixture too close to a rectifier kink: {margin}"
    assert neural.gradient_check(model, x, y) <= 1e-4


def _check_shift_invariance():
    budget = mechanism.PrivacyBudget(2.0)
    base = np.array([0.0, 1.0, 3.0, 2.0])
    p0 = mechanism.exponential_weights(base, 1.0, budget)
    p1 = mechanism.exponential_weights(base + 17.0, 1.0, budget)
    assert 0.5 * np.abs(p0 - p1).sum() <= 1e-12


def _check_random_guess():
    assert abs(baselines.random_guess_score([0.7, 0.3]) - 0.58) < 1e-12


CHECKS = [
    ("condition-table", _check_condition_table),
    ("unit-sphere", _check_sphere),
    ("laplace", _check_laplace),
    ("categorical", _check_categorical),
    ("logsumexp", _check_logsumexp),
    ("depth-hand-cases", _check_depth_hand_cases),
    ("depth-sensitivity", _check_sensitivity),
    ("privacy-audit", _check_audit),
    ("kmeans-fixture", _check_kmeans),
    ("gradient-check", _check_gradients),
    ("shift-invariance", _check_shift_invariance),
    ("random-guess", _check_random_guess),
]


def run_all(report=print) -> bool:
    """Run every check; report one line each; True when all pass."""
    ok = True
    for name, check in CHECKS:
        try:
            check()
        except AssertionError as exc:
            ok = False
            report(f"FAIL {name}: {exc}")
        else:
            report(f"PASS {name}")
    return ok
