import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cgmi.losses import (LOSSES, TargetSpec, arcosh, cross_entropy_loss, loss_by_name, max_margin_loss,
                         poincare_distance, poincare_loss)
from cgmi.oracle import ScoreVector

# frozen from a 40-digit mpmath evaluation of the arcosh formula (eps = 1e-6)
POINCARE_HALF_HALF = 9.903437561287086
POINCARE_3_M1_0 = 8.804825302621977


def test_cross_entropy_examples():
    assert cross_entropy_loss([0.0, 0.0, 0.0], 0) == pytest.approx(math.log(3), abs=1e-15)
    assert cross_entropy_loss([2.0, 1.0, 0.0], 0) == pytest.approx(0.40761, abs=5e-6)
    assert cross_entropy_loss([2.0, 1.0, 0.0], 0) == pytest.approx(0.4076059644443803, abs=1e-15)
    assert cross_entropy_loss([800.0, 0.0, 0.0], 0) == 0.0
    assert cross_entropy_loss([0.0, 800.0], 0) == pytest.approx(800.0)


def test_cross_entropy_matches_naive_formula(rng):
    for _ in range(20):
        s = rng.normal(0, 3, 6)
        c = int(rng.integers(6))
        naive = -math.log(math.exp(s[c]) / sum(math.exp(v) for v in s))
        assert cross_entropy_loss(s, c) == pytest.approx(naive, rel=1e-12, abs=1e-14)


def test_max_margin_examples():
    assert max_margin_loss([5.0, 5.0, 1.0], 0) == 0.0
    assert max_margin_loss([2.0, 5.0, 1.0], 0) == 3.0
    assert max_margin_loss([2.0, 5.0, 1.0], 1) == -3.0
    with pytest.raises(ValueError):
        max_margin_loss([1.0], 0)


def test_poincare_against_formula_oracle():
    u = np.array([0.5, 0.5])
    v = np.array([0.9999, 0.0])
    assert poincare_distance(u, v) == pytest.approx(POINCARE_HALF_HALF, rel=1e-12)
    # s = [1, 1] normalizes to exactly u
    assert poincare_loss([1.0, 1.0], 0) == pytest.approx(POINCARE_HALF_HALF, rel=1e-12)
    assert poincare_loss([3.0, -1.0, 0.0], 0) == pytest.approx(POINCARE_3_M1_0, rel=1e-12)


def test_poincare_zero_when_u_equals_v():
    v = np.array([0.9999, 0.0])
    assert poincare_distance(v, v) == 0.0
    assert arcosh(1.0) == 0.0
    assert arcosh(1.0 - 1e-15) == 0.0


def test_poincare_rejects_all_zero_scores():
    with pytest.raises(ValueError):
        poincare_loss([0.0, 0.0, 0.0], 1)


@pytest.mark.parametrize("name", sorted(LOSSES))
def test_non_finite_scores_rejected(name):
    with pytest.raises(ValueError):
        LOSSES[name]([0.0, np.nan, 1.0], 0)
    with pytest.raises(ValueError):
        LOSSES[name]([0.0, np.inf, 1.0], 0)
    with pytest.raises(ValueError):
        LOSSES[name]([0.0, 1.0], 2)


def test_target_spec_validation():
    with pytest.raises(ValueError):
        TargetSpec(-1)
    with pytest.raises(ValueError):
        TargetSpec(0, 1.0)
    np.testing.assert_array_equal(TargetSpec(2).one_hot(3), [0, 0, 0.9999])


def test_loss_by_name():
    assert loss_by_name() is poincare_loss
    assert loss_by_name("max_margin") is max_margin_loss
    with pytest.raises(ValueError):
        loss_by_name("hinge")


@pytest.mark.parametrize("name", sorted(LOSSES))
def test_batched_equals_rowwise(name, rng):
    s = rng.normal(0, 2, (7, 5))
    f = LOSSES[name]
    np.testing.assert_allclose(f(s, 3), [f(row, 3) for row in s], rtol=0, atol=1e-13)


def test_probability_scores_use_log():
    p = ScoreVector([0.7, 0.2, 0.1], "probs")
    assert cross_entropy_loss(p, 0) == pytest.approx(-math.log(0.7 + 1e-12) + math.log(1 + 3e-12), abs=1e-9)


scores = st.lists(st.floats(-50, 50, allow_nan=False), min_size=2, max_size=8)


@settings(max_examples=100, deadline=None)
@given(scores, st.floats(-100, 100))
def test_shift_invariance(s, delta):
    s = np.array(s)
    for f in (cross_entropy_loss, max_margin_loss):
        assert f(s + delta, 0) == pytest.approx(f(s, 0), abs=1e-9 * (1 + np.abs(s).max() + abs(delta)))


@settings(max_examples=100, deadline=None)
@given(scores, st.floats(1e-3, 1e3))
def test_poincare_scale_invariance(s, alpha):
    s = np.array(s)
    if np.abs(s).sum() < 1e-6:
        return
    assert poincare_loss(alpha * s, 0) == pytest.approx(poincare_loss(s, 0), rel=1e-9, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(scores, st.integers(0, 1))
def test_losses_finite_and_nonnegative(s, c):
    s = np.array(s)
    assert cross_entropy_loss(s, c) >= 0
    if np.abs(s).sum() > 0:
        v = poincare_loss(s, c)
        assert np.isfinite(v) and v >= 0
