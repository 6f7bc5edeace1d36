import numpy as np
import pytest

from cgmi.attack import PoolEntry
from cgmi.oracle import LocalOracle, QueryBudget, ToyClassifier, softmax
from cgmi.selection import (PartialEstimate, TransformSpec, apply_transform, robust_score,
                            sample_transforms, select_by_fitness, select_top)


def _entry(x, fitness=0.0, scores=None):
    x = np.asarray(x, dtype=np.float64)
    return PoolEntry(None, x, x, np.zeros(1) if scores is None else scores, fitness, 0, 1)


@pytest.fixture
def oracle():
    return LocalOracle(ToyClassifier(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.5]]), 0.5))


def test_spec_validation():
    for kw in ({"noise_sigma": -1.0}, {"mask_prob": 1.0}, {"scale_range": (0.0, 1.0)},
               {"scale_range": (1.2, 1.1)}, {"count": 0}):
        with pytest.raises(ValueError):
            TransformSpec(**kw)
    assert TransformSpec().count == 100


def test_identity_and_scaling(rng):
    x = rng.standard_normal(6)
    np.testing.assert_array_equal(apply_transform(TransformSpec.identity(), x, rng), x)
    two = TransformSpec(0.0, 0.0, (2.0, 2.0))
    np.testing.assert_array_equal(apply_transform(two, x, rng), 2 * x)


def test_transform_sequence_reproducible():
    spec = TransformSpec(0.3, 0.2, (0.8, 1.2))
    x = np.arange(5.0)
    a = sample_transforms(spec, x, 7, np.random.default_rng(3))
    b = sample_transforms(spec, x, 7, np.random.default_rng(3))
    np.testing.assert_array_equal(a, b)
    masked = sample_transforms(TransformSpec(0.0, 0.5, (1.0, 1.0)), x + 1, 200, np.random.default_rng(0))
    assert set(np.unique(masked[:, 0])) == {0.0, 1.0}


def test_identity_spec_equals_softmax(oracle):
    x = np.array([0.4, 0.3])
    p = softmax(oracle.query(x, QueryBudget()).scores)
    for n in (1, 5, 37):
        b = QueryBudget()
        assert robust_score(TransformSpec.identity(n), oracle, x, 1, b) == pytest.approx(p[1], abs=1e-15)
        assert b.used == n


def test_single_transform_equals_one_query(oracle):
    spec = TransformSpec(0.2, 0.1, (0.9, 1.1), count=1, seed=4)
    x = np.array([0.5, 0.5])
    xt = apply_transform(spec, x, np.random.default_rng(11))
    expected = softmax(oracle.query(xt, QueryBudget()).scores)[2]
    assert robust_score(spec, oracle, x, 2, QueryBudget(), rng=np.random.default_rng(11)) == expected


def test_planted_centroid_ranks_first(scenario, target):
    spec = TransformSpec.for_training_set(scenario.training_sets[3], count=100, seed=1)
    own = robust_score(spec, target, scenario.target.centroids[3], 3, QueryBudget())
    for c in range(scenario.num_classes):
        if c != 3:
            assert own > robust_score(spec, target, scenario.target.centroids[c], 3, QueryBudget())
    assert 0.0 <= own <= 1.0


def test_dominance_and_full_reorder(oracle):
    pool = [_entry([-5.0, 5.0], fitness=0.0), _entry([1.0, 0.0], fitness=1.0)]
    sel = select_top(TransformSpec(0.05, 0.0, (0.95, 1.05), count=10), oracle, pool, 1, 1, QueryBudget())
    assert sel.indices == [1]
    sel = select_top(TransformSpec.identity(3), oracle, pool, 1, 2, QueryBudget())
    assert sorted(sel.indices) == [0, 1] and sel.indices[0] == 1
    assert [r["index"] for r in sel.report()] == sel.ranking
    with pytest.raises(ValueError):
        select_top(TransformSpec.identity(), oracle, pool, 1, 3, QueryBudget())


def test_identity_ranking_matches_cached_softmax(oracle, rng):
    xs = rng.normal(0.5, 1.0, (12, 2))
    scores = oracle.query_scores(xs, QueryBudget())
    pool = [_entry(x, fitness=float(i), scores=s) for i, (x, s) in enumerate(zip(xs, scores))]
    sel = select_top(TransformSpec.identity(2), oracle, pool, 0, 12, QueryBudget())
    expected = sorted(range(12), key=lambda i: (-softmax(scores[i])[0], i))
    assert sel.ranking == expected


def test_tie_break_by_fitness_then_index(oracle):
    x = [0.2, 0.2]
    pool = [_entry(x, 3.0), _entry(x, 1.0), _entry(x, 1.0)]
    sel = select_top(TransformSpec.identity(), oracle, pool, 0, 3, QueryBudget())
    assert sel.ranking == [1, 2, 0]


def test_default_selection_query_count(oracle, rng):
    pool = [_entry(x) for x in rng.standard_normal((200, 2))]
    budget = QueryBudget()
    sel = select_top(TransformSpec(0.1), oracle, pool, 0, 50, budget)
    assert budget.used == sel.queries == 20_000
    assert len(sel.indices) == 50


def test_monte_carlo_variance_scales_inverse_n(oracle):
    x = np.array([0.5, 0.4])
    variances = []
    for n in (10, 40, 160):
        spec = TransformSpec(0.3, 0.1, (0.9, 1.1), count=n)
        vals = [robust_score(spec, oracle, x, 1, QueryBudget(), rng=np.random.default_rng([n, rep]))
                for rep in range(600)]
        variances.append(np.var(vals, ddof=1))
    for a, b in zip(variances, variances[1:]):
        assert 2.0 <= a / b <= 8.0


def test_permutation_invariance(oracle, rng):
    xs = rng.normal(0.5, 1.0, (15, 2))
    pool = [_entry(x, fitness=float(rng.random())) for x in xs]
    spec = TransformSpec(0.2, 0.1, count=20, seed=8)
    base = select_top(spec, oracle, pool, 2, 5, QueryBudget())
    perm = rng.permutation(15)
    shuffled = select_top(spec, oracle, [pool[i] for i in perm], 2, 5, QueryBudget())
    assert [perm[i] for i in shuffled.indices] == base.indices


def test_partial_estimate_and_partial_selection(oracle):
    spec = TransformSpec(0.1, count=10)
    b = QueryBudget(4)
    with pytest.raises(PartialEstimate) as info:
        robust_score(spec, oracle, np.zeros(2), 0, b)
    assert info.value.count == 4 and 0 <= info.value.mean <= 1 and b.used == 4
    pool = [_entry([0.0, 0.0]), _entry([1.0, 0.0]), _entry([0.0, 1.0])]
    sel = select_top(spec, oracle, pool, 0, 1, QueryBudget(25))
    assert sel.partial and sel.ranking == [0, 1] and sel.queries == 25
    assert sel.report()[0]["robust_score"] is not None


def test_select_by_fitness_is_free():
    pool = [_entry([0.0], 2.0), _entry([1.0], 0.5), _entry([2.0], 0.5)]
    sel = select_by_fitness(pool, 2)
    assert sel.indices == [1, 2] and sel.queries == 0
