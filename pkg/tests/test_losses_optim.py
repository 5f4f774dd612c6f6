import math

import numpy as np
import pytest

from sslab import tensor as T
from sslab.losses import BceLoss, balanced_loss, balanced_loss_t, bce_loss, bce_loss_t, make_loss
from sslab.optim import OptimizerState, lr_at, sgd_step


class TestBceLoss:
    def test_half_belief_is_ln2(self):
        assert bce_loss(np.array([0.5]), np.array([1.0])) == pytest.approx(math.log(2.0))

    def test_certain_correct_is_clamped_zero(self):
        v = bce_loss(np.array([1.0]), np.array([1.0]), BceLoss(clamp_eps=1e-7))
        assert v == pytest.approx(-math.log(1.0 - 1e-7))

    def test_weighted_wrong_side(self):
        v = bce_loss(np.array([0.9]), np.array([0.0]), BceLoss(w_f=0.98, w_m=1.02))
        assert v == pytest.approx(0.98 * -math.log(0.1), rel=1e-6)
        assert v == pytest.approx(2.2565, abs=5e-4)

    def test_labels_validated(self):
        with pytest.raises(T.ContractError):
            bce_loss(np.array([0.5]), np.array([2.0]))

    def test_convex_in_belief(self):
        rng = np.random.default_rng(0)
        kind = BceLoss()
        for _ in range(200):
            y = np.array([float(rng.integers(0, 2))])
            a, b = np.sort(rng.uniform(kind.clamp_eps, 1 - kind.clamp_eps, 2))
            mid = (a + b) / 2
            lhs = bce_loss(np.array([mid]), y, kind)
            rhs = 0.5 * (bce_loss(np.array([a]), y, kind) + bce_loss(np.array([b]), y, kind))
            assert lhs <= rhs + 1e-12

    def test_confident_mistake_dominates(self):
        # the asymmetry behind rising validation loss
        assert bce_loss(np.array([0.01]), np.array([1.0])) > 4.0 * bce_loss(np.array([0.5]), np.array([1.0]))

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(1)
        y = rng.integers(0, 2, 6).astype(float)
        kind = BceLoss(w_f=0.9, w_m=1.1)
        err = T.finite_difference_check(
            lambda t: bce_loss_t(t, y, kind), rng.uniform(0.05, 0.95, 6), 1e-7
        )
        assert err < 1e-6


class TestBalancedLoss:
    def test_endpoints(self):
        assert balanced_loss(np.array([1.0]), np.array([1.0])) == pytest.approx(0.0)
        assert balanced_loss(np.array([0.0]), np.array([1.0])) == pytest.approx(2.0)
        assert balanced_loss(np.array([0.5]), np.array([1.0])) == pytest.approx(1.0)
        assert balanced_loss(np.array([0.5]), np.array([0.0])) == pytest.approx(1.0)

    def test_bounded_and_symmetric(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            p = rng.random()
            for y in (0.0, 1.0):
                v = balanced_loss(np.array([p]), np.array([y]))
                assert 0.0 <= v <= 2.0
            lhs = balanced_loss(np.array([p]), np.array([1.0]))
            rhs = balanced_loss(np.array([1.0 - p]), np.array([0.0]))
            assert lhs == rhs  # cos(pi p) = -cos(pi (1-p)) exactly? no: identity holds in floats via same op

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(3)
        y = rng.integers(0, 2, 5).astype(float)
        err = T.finite_difference_check(lambda t: balanced_loss_t(t, y), rng.uniform(0.1, 0.9, 5), 1e-7)
        assert err < 1e-6

    def test_make_loss_selection(self):
        f, ft = make_loss("balanced")
        assert f(np.array([0.5]), np.array([1.0])) == pytest.approx(1.0)
        with pytest.raises(ValueError, match="unknown loss"):
            make_loss("hinge")


class TestSgd:
    def test_vanilla_step(self):
        params = {"w": np.array([1.0])}
        state = OptimizerState(lr0=0.1, momentum=0.0, weight_decay=0.0, nesterov=False, gamma=1.0)
        sgd_step(params, {"w": np.array([0.5])}, state)
        assert params["w"][0] == pytest.approx(0.95)

    def test_two_step_nesterov_oracle(self):
        params = {"w": np.array([0.0])}
        state = OptimizerState(lr0=0.1, momentum=0.9, weight_decay=0.0, nesterov=True, gamma=1.0)
        sgd_step(params, {"w": np.array([1.0])}, state)
        assert params["w"][0] == pytest.approx(-0.19)
        sgd_step(params, {"w": np.array([1.0])}, state)
        assert params["w"][0] == pytest.approx(-0.461)

    def test_zero_grad_no_motion(self):
        params = {"w": np.array([2.0, -3.0])}
        state = OptimizerState(lr0=0.1, momentum=0.9, weight_decay=0.0, nesterov=True, gamma=1.0)
        sgd_step(params, {"w": np.zeros(2)}, state)
        assert np.array_equal(params["w"], [2.0, -3.0])

    def test_weight_decay_pulls_toward_zero(self):
        params = {"w": np.array([1.0])}
        state = OptimizerState(lr0=0.1, momentum=0.0, weight_decay=0.5, nesterov=False, gamma=1.0)
        sgd_step(params, {"w": np.zeros(1)}, state)
        assert params["w"][0] == pytest.approx(1.0 - 0.1 * 0.5)

    def test_reduces_to_plain_sgd_with_zeroed_hyperparams(self):
        rng = np.random.default_rng(4)
        theta = rng.normal(size=7)
        g = rng.normal(size=7)
        params = {"w": theta.copy()}
        state = OptimizerState(lr0=0.05, momentum=0.0, weight_decay=0.0, nesterov=False, gamma=1.0)
        sgd_step(params, {"w": g}, state)
        assert np.array_equal(params["w"], theta - 0.05 * g)

    def test_shape_mismatch(self):
        state = OptimizerState()
        with pytest.raises(T.ShapeMismatchError):
            sgd_step({"w": np.zeros(3)}, {"w": np.zeros(2)}, state)


class TestLrSchedule:
    def test_epoch_zero(self):
        assert lr_at(OptimizerState(lr0=1e-3), 0) == 1e-3

    def test_one_decay(self):
        assert lr_at(OptimizerState(lr0=1e-3, gamma=0.99), 1) == pytest.approx(9.9e-4)

    def test_hundred_epochs(self):
        assert lr_at(OptimizerState(lr0=1e-3, gamma=0.99), 100) == pytest.approx(1e-3 * 0.99**100)
        assert lr_at(OptimizerState(lr0=1e-3, gamma=0.99), 100) == pytest.approx(3.660e-4, abs=1e-6)

    def test_negative_epoch_rejected(self):
        with pytest.raises(ValueError):
            lr_at(OptimizerState(), -1)
