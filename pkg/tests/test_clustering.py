import numpy as np
import pytest

from deepcand.clustering import assign, fit_kmeans, load_kmeans, save_kmeans
from deepcand.mathkit import SeededRng

FOUR_POINTS = np.array([[0.0, 0.0], [0.0, 2.0], [10.0, 0.0], [10.0, 2.0]])


def test_four_point_symmetric_fixture():
    model = fit_kmeans(FOUR_POINTS, 2, SeededRng(2, "selftest-km"))
    assert sorted(model.centers.tolist()) == [[0.0, 1.0], [10.0, 1.0]]
    assert model.inertia == pytest.approx(4.0, abs=1e-12)
    # the two left points share a cluster, the two right points the other
    assert model.labels[0] == model.labels[1]
    assert model.labels[2] == model.labels[3]
    assert model.labels[0] != model.labels[2]


def test_inertia_nonincreasing_and_matches_labels():
    rng = SeededRng(40, "km-mono")
    for i in range(25):
        inst = rng.child(f"i{i}")
        pts = inst.normals((60, 5)) + inst.normals((1, 5)) * 2.0
        model = fit_kmeans(pts, 4, inst.child("fit"))
        hist = np.array(model.inertia_history)
        assert len(hist) >= 2
        assert (np.diff(hist) <= 1e-9).all(), hist
        assert model.inertia == hist[-1]
        np.testing.assert_array_equal(assign(model, pts), model.labels)


def test_kmeans_deterministic():
    pts = SeededRng(8, "km-det").normals((50, 3))
    m1 = fit_kmeans(pts, 3, SeededRng(11, "fit"))
    m2 = fit_kmeans(pts, 3, SeededRng(11, "fit"))
    np.testing.assert_array_equal(m1.centers, m2.centers)
    np.testing.assert_array_equal(m1.labels, m2.labels)


def test_kmeans_one_cluster_is_mean():
    pts = SeededRng(9).normals((30, 4))
    model = fit_kmeans(pts, 1, SeededRng(0, "fit"))
    np.testing.assert_allclose(model.centers[0], pts.mean(axis=0), atol=1e-12)


def test_kmeans_k_equals_n():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [5.0, 5.0]])
    model = fit_kmeans(pts, 4, SeededRng(1, "fit"))
    assert model.inertia == pytest.approx(0.0, abs=1e-18)
    assert sorted(model.labels.tolist()) == [0, 1, 2, 3]


def test_kmeans_duplicate_points_no_empty_clusters():
    # heavy duplication exercises the empty-cluster reseeding path
    base = np.array([[0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [9.0, 9.0], [9.0, 9.0], [4.0, 4.0]])
    model = fit_kmeans(base, 3, SeededRng(5, "fit"))
    assert np.bincount(model.labels, minlength=3).min() >= 1
    assert model.inertia == pytest.approx(0.0, abs=1e-18)


def test_kmeans_validation():
    with pytest.raises(ValueError):
        fit_kmeans(np.zeros((0, 2)), 1, SeededRng(0))
    with pytest.raises(ValueError):
        fit_kmeans(np.zeros((3, 2)), 4, SeededRng(0))
    with pytest.raises(ValueError):
        fit_kmeans(np.array([[np.nan, 0.0]]), 1, SeededRng(0))
    with pytest.raises(ValueError):
        assign(fit_kmeans(FOUR_POINTS, 2, SeededRng(2, "selftest-km")), np.zeros((2, 3)))


def test_save_load_round_trip(tmp_path):
    model = fit_kmeans(FOUR_POINTS, 2, SeededRng(2, "selftest-km"))
    save_kmeans(model, tmp_path / "km")
    back = load_kmeans(tmp_path / "km")
    assert back.n_clusters == 2
    assert back.inertia == pytest.approx(model.inertia)
    # centers pass through binary32 storage
    np.testing.assert_allclose(back.centers, model.centers, rtol=1e-6)
    np.testing.assert_array_equal(assign(back, FOUR_POINTS), model.labels)
