import itertools
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from labelnoise.elr import (
    CE_MODES,
    REGULARIZER_MODES,
    ElrState,
    bce_loss,
    elr_loss,
    mix_targets,
    mixed_batch_targets,
    update_targets,
)
from oracles import max_relative_error

MODES = list(itertools.product(CE_MODES, REGULARIZER_MODES))


class TestUpdateTargets:
    def test_one_step(self):
        state = ElrState.zeros(3, 1, beta=0.7)
        update_targets(state, [1], np.array([[1.0]]))
        np.testing.assert_allclose(state.targets.ravel(), [0.0, 0.3, 0.0], atol=1e-15)

    def test_beta_one_freezes(self):
        state = ElrState(np.full((4, 2), 0.25), beta=1.0)
        update_targets(state, [0, 3], np.full((2, 2), 0.9))
        assert (state.targets == 0.25).all()

    def test_geometric_convergence(self):
        beta, p = 0.6, 0.83
        state = ElrState.zeros(1, 1, beta=beta)
        for k in range(1, 30):
            update_targets(state, [0], np.array([[p]]))
            assert abs(state.targets[0, 0] - p) == pytest.approx(beta**k * p, rel=1e-10)

    def test_unknown_id(self):
        state = ElrState.zeros(3, 1)
        with pytest.raises(IndexError, match="unknown sample id"):
            update_targets(state, [3], np.array([[0.5]]))

    @given(arrays(np.float64, (5, 3), elements=st.floats(0, 1)),
           arrays(np.float64, (5, 3), elements=st.floats(0, 1)),
           st.floats(0, 1))
    def test_stays_in_unit_interval(self, t0, p, beta):
        state = ElrState(t0.copy(), beta=beta)
        update_targets(state, np.arange(5), p)
        assert (state.targets >= 0).all() and (state.targets <= 1).all()

    def test_state_validation(self):
        with pytest.raises(ValueError):
            ElrState(np.full((2, 2), 1.5))
        with pytest.raises(ValueError):
            ElrState.zeros(2, 2, target_mix_alpha=0.0)
        with pytest.raises(ValueError):
            ElrState.zeros(2, 2, regularizer_mode="bogus")


class TestLossValues:
    def test_bce_at_half(self):
        loss, _ = elr_loss(np.array([[0.5]]), np.array([[1]]), np.array([[0.3]]), 0.0)
        assert loss == pytest.approx(math.log(2), abs=1e-15)

    def test_regularized_reference(self):
        mpmath.mp.dps = 50
        expected = float(mpmath.log(2) + 3 * mpmath.log(mpmath.mpf("0.75")))
        loss, _ = elr_loss(np.array([[0.5]]), np.array([[1]]), np.array([[0.5]]), 3.0,
                           "full_bce", "per_label_mean")
        assert loss == pytest.approx(expected, abs=1e-14)
        assert loss == pytest.approx(-0.169899, abs=1e-6)

    @pytest.mark.parametrize("ce,reg", MODES)
    def test_zero_targets_reduce_to_ce(self, ce, reg):
        rng = np.random.default_rng(0)
        p = rng.uniform(0.05, 0.95, (6, 4))
        y = rng.integers(0, 2, (6, 4))
        with_reg = elr_loss(p, y, np.zeros_like(p), 3.0, ce, reg)
        without = elr_loss(p, y, None, 0.0, ce, reg)
        assert with_reg[0] == pytest.approx(without[0], abs=1e-15)
        np.testing.assert_allclose(with_reg[1], without[1], atol=1e-15)

    def test_positive_only_ignores_negatives(self):
        p = np.array([[0.9, 0.2]])
        loss, grad = elr_loss(p, np.array([[0, 1]]), None, 0.0, "positive_only")
        assert loss == pytest.approx(-math.log(0.2))
        assert grad[0, 0] == 0.0

    def test_mean_over_batch(self):
        p = np.array([[0.3, 0.6], [0.8, 0.1]])
        y = np.array([[1, 0], [0, 1]])
        t = np.array([[0.2, 0.9], [0.5, 0.4]])
        total = elr_loss(p, y, t, 2.0)[0]
        rows = [elr_loss(p[i:i + 1], y[i:i + 1], t[i:i + 1], 2.0)[0] for i in range(2)]
        assert total == pytest.approx(np.mean(rows), abs=1e-15)

    def test_per_label_formula(self):
        p = np.array([[0.3, 0.6, 0.9]])
        y = np.array([[1, 0, 1]])
        t = np.array([[0.2, 0.9, 0.5]])
        ce = -(np.log(0.3) + np.log(0.4) + np.log(0.9))
        reg = np.mean(np.log(1 - t * p))
        assert elr_loss(p, y, t, 1.5)[0] == pytest.approx(ce + 1.5 * reg, abs=1e-14)

    def test_inner_product_formula_and_floor(self):
        p = np.array([[0.3, 0.6]])
        y = np.array([[1, 0]])
        t = np.array([[0.2, 0.9]])
        ce = -(np.log(0.3) + np.log(0.4))
        reg = np.log(1 - (0.2 * 0.3 + 0.9 * 0.6) / 2)
        assert elr_loss(p, y, t, 2.0, "full_bce", "inner_product")[0] == pytest.approx(ce + 2 * reg, abs=1e-14)
        high = np.full((1, 2), 1.0)
        loss, grad = elr_loss(high, np.ones((1, 2)), high, 1.0, "full_bce", "inner_product")
        assert np.isfinite(loss)
        assert np.all(np.isfinite(grad))

    def test_clamp_keeps_loss_finite(self):
        p = np.array([[0.0, 1.0]])
        loss, grad = elr_loss(p, np.array([[1, 0]]), np.array([[1.0, 1.0]]), 3.0)
        assert np.isfinite(loss)
        assert (grad == 0).all()


class TestGradients:
    @pytest.mark.parametrize("ce,reg", MODES)
    @pytest.mark.parametrize("seed", range(3))
    def test_matches_central_difference(self, ce, reg, seed):
        rng = np.random.default_rng(seed)
        p = rng.uniform(0.05, 0.95, (5, 3))
        y = rng.integers(0, 2, (5, 3))
        t = rng.uniform(0, 1, (5, 3))
        _, grad = elr_loss(p, y, t, 3.0, ce, reg)
        numeric = np.zeros_like(p)
        h = 1e-6
        for idx in np.ndindex(p.shape):
            up, down = p.copy(), p.copy()
            up[idx] += h
            down[idx] -= h
            numeric[idx] = (elr_loss(up, y, t, 3.0, ce, reg)[0] - elr_loss(down, y, t, 3.0, ce, reg)[0]) / (2 * h)
        assert max_relative_error(grad, numeric) < 1e-6

    @settings(max_examples=50)
    @given(arrays(np.float64, (4, 3), elements=st.floats(0.01, 0.99)),
           arrays(np.float64, (4, 3), elements=st.floats(0, 1)))
    def test_regularizer_gradient_sign(self, p, t):
        y = np.zeros_like(p)
        _, with_reg = elr_loss(p, y, t, 3.0)
        _, ce_only = elr_loss(p, y, t, 0.0)
        reg_grad = with_reg - ce_only
        assert (reg_grad <= 1e-15).all()
        expected = 3.0 * -(t / 3) / (1 - t * p) / p.shape[0]
        np.testing.assert_allclose(reg_grad, expected, rtol=1e-9, atol=1e-15)

    def test_bce_helper_is_lambda_zero(self):
        rng = np.random.default_rng(1)
        p = rng.uniform(0.1, 0.9, (3, 2))
        y = rng.integers(0, 2, (3, 2))
        a, b = bce_loss(p, y), elr_loss(p, y, rng.uniform(size=(3, 2)), 0.0)
        assert a[0] == b[0]
        assert a[1].tobytes() == b[1].tobytes()


class TestMixTargets:
    def test_equal_rows(self):
        t = np.array([0.1, 0.7, 0.3])
        np.testing.assert_allclose(mix_targets(t, t.copy(), 0.5, seed=3), t, atol=1e-15)

    def test_degenerate_weight_one_returns_first(self):
        class AlwaysOne:
            def beta(self, a, b):
                return 1.0

        t_i, t_j = np.array([0.2, 0.9]), np.array([0.8, 0.1])
        np.testing.assert_array_equal(mix_targets(t_i, t_j, 1.0, AlwaysOne()), t_i)

    @given(arrays(np.float64, 4, elements=st.floats(0, 1)), arrays(np.float64, 4, elements=st.floats(0, 1)),
           st.floats(0.05, 5.0), st.integers(0, 1000))
    def test_stays_in_entrywise_hull(self, t_i, t_j, alpha, seed):
        m = mix_targets(t_i, t_j, alpha, seed)
        assert np.all(m >= np.minimum(t_i, t_j) - 1e-15)
        assert np.all(m <= np.maximum(t_i, t_j) + 1e-15)

    def test_rejects_bad_alpha(self):
        with pytest.raises(ValueError):
            mix_targets(np.zeros(2), np.ones(2), 0.0, 0)

    def test_batch_mixing_preserves_shape(self):
        t = np.random.default_rng(0).uniform(size=(8, 3))
        m = mixed_batch_targets(t, 1.0, np.random.default_rng(1))
        assert m.shape == t.shape
        assert (m >= t.min(axis=0) - 1e-15).all() and (m <= t.max(axis=0) + 1e-15).all()
