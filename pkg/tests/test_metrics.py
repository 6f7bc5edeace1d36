import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cgmi.metrics import (SHRINKAGE, IdentityFeatures, RandomProjection, covariance, delta_eval, evaluate,
                          feature_map, fid, frechet_distance, topk_accuracy, topk_hits)
from cgmi.oracle import LocalOracle, QueryBudget, ToyClassifier


def test_fid_of_a_set_with_itself(rng):
    a = rng.standard_normal((300, 5))
    assert abs(fid(a, a)) < 1e-9


def test_fid_one_dimensional_closed_form():
    for mu_a, s_a, mu_b, s_b in [(0.0, 1.0, 1.0, 2.0), (3.0, 0.5, -1.0, 0.5), (0.0, 3.0, 0.0, 1.0)]:
        d = frechet_distance([mu_a], [[s_a ** 2]], [mu_b], [[s_b ** 2]])
        assert d == pytest.approx((mu_a - mu_b) ** 2 + (s_a - s_b) ** 2, abs=1e-12)


def test_fid_diagonal_covariances(rng):
    sa, sb = rng.uniform(0.1, 3, 6), rng.uniform(0.1, 3, 6)
    ma, mb = rng.standard_normal(6), rng.standard_normal(6)
    expected = np.sum((ma - mb) ** 2) + np.sum((sa - sb) ** 2)
    assert frechet_distance(ma, np.diag(sa ** 2), mb, np.diag(sb ** 2)) == pytest.approx(expected, rel=1e-10)


def test_fid_symmetry_and_translation(rng):
    a = rng.standard_normal((80, 4)) @ rng.standard_normal((4, 4))
    b = rng.standard_normal((60, 4)) + 1.0
    assert fid(a, b) == pytest.approx(fid(b, a), rel=1e-9)
    t = rng.standard_normal(4)
    shift = float(np.sum((a.mean(0) + t - b.mean(0)) ** 2) - np.sum((a.mean(0) - b.mean(0)) ** 2))
    assert fid(a + t, b) == pytest.approx(fid(a, b) + shift, rel=1e-9, abs=1e-9)
    assert fid(a + t, b + t) == pytest.approx(fid(a, b), rel=1e-9, abs=1e-9)


def test_covariance_unbiased_and_shrinkage():
    assert covariance([[0.0], [2.0]])[0, 0] == 2.0
    cov = covariance(np.array([[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]]))
    np.testing.assert_allclose(np.diag(cov), [2.0 + SHRINKAGE, SHRINKAGE, SHRINKAGE])
    assert np.isfinite(fid(np.array([[0.0, 1.0], [1.0, 0.0]]), np.array([[0.5, 0.5], [0.2, 0.1]])))


def test_fid_rejects_bad_input():
    with pytest.raises(ValueError):
        frechet_distance([0.0, 0.0], np.eye(2), [0.0, 0.0], np.diag([1.0, -1.0]))
    with pytest.raises(ValueError):
        fid([[np.nan, 0.0], [0.0, 0.0]], [[0.0, 0.0], [1.0, 1.0]])
    with pytest.raises(ValueError):
        fid(np.zeros((3, 2)), np.zeros((3, 3)))


def test_delta_eval_matches_brute_force(rng):
    a = rng.standard_normal((20, 3))
    b = rng.standard_normal((35, 3))
    brute = np.mean([min(float(np.sum((x - y) ** 2)) for y in b) for x in a])
    assert delta_eval(IdentityFeatures(), a, b) == pytest.approx(brute, rel=1e-12)
    assert delta_eval(IdentityFeatures(), b[:5], b) == 0.0
    with pytest.raises(ValueError):
        delta_eval(IdentityFeatures(), np.empty((0, 3)), b)


def test_feature_maps():
    assert isinstance(feature_map("identity"), IdentityFeatures)
    p = feature_map("projection", 8, 3, seed=2)
    assert isinstance(p, RandomProjection) and p(np.ones((4, 8))).shape == (4, 3)
    np.testing.assert_array_equal(p.matrix, RandomProjection(8, 3, 2).matrix)
    with pytest.raises(ValueError):
        feature_map("projection")
    with pytest.raises(ValueError):
        feature_map("inception")


def test_topk_ties_go_to_lower_index():
    s = np.array([[1.0, 1.0, 0.0]])
    assert topk_hits(s, 0, 1)[0] and not topk_hits(s, 1, 1)[0]
    assert topk_hits(s, 1, 2)[0]


@settings(max_examples=80, deadline=None)
@given(st.lists(st.floats(-10, 10, allow_nan=False), min_size=3, max_size=7), st.data())
def test_topk_properties(row, data):
    s = np.array([row])
    c = data.draw(st.integers(0, len(row) - 1))
    hits = [bool(topk_hits(s, c, k)[0]) for k in range(1, len(row) + 1)]
    assert hits[-1]
    assert hits == sorted(hits)  # monotone in k
    assert sum(bool(topk_hits(s, j, 1)[0]) for j in range(len(row))) == 1


def test_topk_accuracy_and_evaluate(rng):
    cents = np.array([[0.0, 0.0], [3.0, 0.0], [0.0, 3.0]])
    oracle = LocalOracle(ToyClassifier(cents))
    xs = cents[1] + 0.1 * rng.standard_normal((10, 2))
    assert topk_accuracy(oracle, xs, 1, 1) == 1.0
    assert topk_accuracy(oracle, xs, 0, 1) == 0.0
    assert topk_accuracy(oracle, xs, 0, 3) == 1.0
    b = QueryBudget()
    m = evaluate(oracle, IdentityFeatures(), xs, cents[1] + 0.1 * rng.standard_normal((30, 2)), 1, b)
    assert b.used == 10 and m.count == 10
    assert m.acc1 == m.acc5 == 1.0 and m.delta_eval > 0 and m.fid >= 0
    assert set(m.to_dict()) == {"acc1", "acc5", "delta_eval", "fid", "count", "delta_face"}
    with pytest.raises(ValueError):
        topk_accuracy(oracle, xs, 0, 0)
