"""Tests for losses, the optimizer and gradient checking."""

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from permutofilt.errors import LabelOutOfRangeError, ShapeMismatchError
from permutofilt.training import (
    SgdState,
    batch_order,
    grad_check,
    inverse_frequency_weights,
    logistic_loss,
    mse_loss,
    sgd_step,
)
from permutofilt.training.blocks import GradTarget, make_block


class WrongGradient:
    """A quadratic whose reported gradient is off by a factor of two."""

    def parameters(self):
        return {"a": np.array([1.0, -2.0, 0.5])}

    def loss_and_grads(self, params):
        a = params["a"]
        return float(np.sum(a**2)), {"a": 4.0 * a}


class TestLosses:
    """Tests for mse and logistic losses."""

    def test_mse_value_and_gradient(self):
        loss, grad = mse_loss(np.array([[1.0], [3.0]]), np.array([[0.0], [1.0]]))
        assert loss == pytest.approx(2.5)
        assert_allclose(grad, [[1.0], [2.0]])

    def test_mse_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            mse_loss(np.zeros(3), np.zeros(4))

    def test_logistic_uniform_scores(self):
        loss, grad = logistic_loss(np.zeros((2, 4)), np.array([0, 3]))
        assert loss == pytest.approx(np.log(4.0))
        assert_allclose(grad.sum(axis=1), 0.0, atol=1e-15)
        assert grad[0, 0] == pytest.approx((0.25 - 1.0) / 2)

    def test_class_weights_scale_rows(self, rng):
        scores = rng.normal(size=(5, 3))
        labels = np.array([0, 1, 2, 1, 0])
        _, plain = logistic_loss(scores, labels)
        _, weighted = logistic_loss(scores, labels, np.array([2.0, 1.0, 0.5]))
        assert_allclose(weighted, plain * np.array([2.0, 1.0, 0.5, 1.0, 2.0])[:, np.newaxis])

    def test_logistic_gradient_matches_finite_differences(self, rng):
        scores = rng.normal(size=(4, 3))
        labels = np.array([2, 0, 1, 1])
        _, grad = logistic_loss(scores, labels)
        h = 1e-6
        for i, j in [(0, 0), (1, 2), (3, 1)]:
            up, down = scores.copy(), scores.copy()
            up[i, j] += h
            down[i, j] -= h
            numeric = (logistic_loss(up, labels)[0] - logistic_loss(down, labels)[0]) / (2 * h)
            assert grad[i, j] == pytest.approx(numeric, rel=1e-6)

    def test_logistic_is_stable_for_large_scores(self):
        scores = np.array([[1000.0, 0.0, -1000.0], [-800.0, 800.0, 0.0]])
        loss, grad = logistic_loss(scores, np.array([0, 0]))
        assert np.isfinite(loss)
        assert loss == pytest.approx(1600.0 / 2)
        assert np.all(np.isfinite(grad))
        assert_allclose(grad.sum(axis=1), 0.0, atol=1e-15)

    def test_losses_follow_a_point_permutation(self, rng):
        scores = rng.normal(size=(6, 3))
        labels = np.array([0, 2, 1, 1, 0, 2])
        weights = np.array([1.5, 0.5, 1.0])
        perm = rng.permutation(6)
        loss, grad = logistic_loss(scores, labels, weights)
        loss_p, grad_p = logistic_loss(scores[perm], labels[perm], weights)
        assert loss_p == pytest.approx(loss, rel=1e-12)
        assert_allclose(grad_p, grad[perm], rtol=1e-12)
        target = rng.normal(size=(6, 3))
        mse, mse_grad = mse_loss(scores, target)
        mse_p, mse_grad_p = mse_loss(scores[perm], target[perm])
        assert mse_p == pytest.approx(mse, rel=1e-12)
        assert_allclose(mse_grad_p, mse_grad[perm], rtol=1e-12)

    def test_logistic_follows_a_label_permutation(self, rng):
        scores = rng.normal(size=(5, 4))
        labels = np.array([3, 0, 1, 2, 3])
        weights = np.array([1.0, 2.0, 0.5, 1.5])
        relabel = np.array([2, 0, 3, 1])
        # column relabel[l] of the permuted scores holds label l
        permuted = np.empty_like(scores)
        permuted[:, relabel] = scores
        moved = np.empty_like(weights)
        moved[relabel] = weights
        loss, grad = logistic_loss(scores, labels, weights)
        loss_p, grad_p = logistic_loss(permuted, relabel[labels], moved)
        assert loss_p == pytest.approx(loss, rel=1e-12)
        assert_allclose(grad_p[:, relabel], grad, rtol=1e-12)

    def test_label_out_of_range(self):
        with pytest.raises(LabelOutOfRangeError):
            logistic_loss(np.zeros((2, 2)), np.array([0, 2]))

    def test_inverse_frequency_weights(self):
        w = inverse_frequency_weights(np.array([0, 0, 0, 1]), 2)
        assert w.mean() == pytest.approx(1.0)
        assert w[1] == pytest.approx(3.0 * w[0])

    def test_absent_class_gets_the_largest_weight(self):
        w = inverse_frequency_weights(np.array([0, 0, 1]), 3)
        assert w[2] == pytest.approx(w[1])
        assert w[1] > w[0]


class TestSgd:
    """Tests for the momentum update and batch ordering."""

    def test_first_step_is_plain_gradient_descent(self):
        state = SgdState(lr=0.1, momentum=0.9, weight_decay=0.0)
        out = sgd_step({"a": np.array([1.0])}, {"a": np.array([2.0])}, state)
        assert_allclose(out["a"], [0.8])

    def test_momentum_accumulates(self):
        state = SgdState(lr=0.1, momentum=0.5, weight_decay=0.0)
        params = {"a": np.array([0.0])}
        params = sgd_step(params, {"a": np.array([1.0])}, state)
        params = sgd_step(params, {"a": np.array([1.0])}, state)
        assert_allclose(params["a"], [-0.1 - 0.15])

    def test_weight_decay_only_on_listed_parameters(self):
        state = SgdState(lr=1.0, momentum=0.0, weight_decay=0.5, decay=frozenset({"taps"}))
        params = {"taps": np.ones(1), "scale": np.ones(1)}
        out = sgd_step(params, {"taps": np.zeros(1), "scale": np.zeros(1)}, state)
        assert_allclose(out["taps"], [0.5])
        assert_allclose(out["scale"], [1.0])

    def test_zero_learning_rate_keeps_parameters(self, rng):
        state = SgdState(lr=0.0, momentum=0.9, weight_decay=0.5, decay=frozenset({"taps"}))
        params = {"taps": rng.normal(size=(2, 3)), "scale": rng.normal(size=1)}
        out = params
        for _ in range(3):
            grads = {name: rng.normal(size=v.shape) for name, v in out.items()}
            out = sgd_step(out, grads, state)
        for name, value in params.items():
            assert_array_equal(out[name], value)

    def test_mismatched_names(self):
        with pytest.raises(ShapeMismatchError):
            sgd_step({"a": np.zeros(1)}, {"b": np.zeros(1)}, SgdState(lr=0.1))

    def test_bad_momentum(self):
        with pytest.raises(ValueError):
            SgdState(lr=0.1, momentum=1.0)

    def test_batch_order_is_a_partition(self):
        batches = batch_order(10, 3, seed=7, epoch=0)
        assert [len(b) for b in batches] == [3, 3, 3, 1]
        assert sorted(np.concatenate(batches).tolist()) == list(range(10))

    def test_batch_order_is_reproducible(self):
        a = batch_order(20, 4, seed=3, epoch=2)
        b = batch_order(20, 4, seed=3, epoch=2)
        for x, y in zip(a, b, strict=True):
            assert_array_equal(x, y)
        other = np.concatenate(batch_order(20, 4, seed=3, epoch=3))
        assert not np.array_equal(np.concatenate(a), other)


class TestGradCheck:
    """Tests for the finite-difference checker."""

    def test_detects_a_wrong_gradient(self):
        report = grad_check(WrongGradient(), probes=3)
        assert not report.passed
        assert report.max_rel_err == pytest.approx(0.5, rel=1e-6)

    def test_probes_are_capped_by_size(self):
        report = grad_check(WrongGradient(), probes=50)
        assert len(report.probes) == 3

    def test_merge(self):
        a = grad_check(WrongGradient(), probes=1, seed=1)
        b = grad_check(WrongGradient(), probes=2, seed=2)
        merged = a.merge(b)
        assert len(merged.probes) == 3
        assert merged.failures == a.failures + b.failures

    @pytest.mark.parametrize("target", list(GradTarget))
    def test_every_block_passes(self, target):
        for seed in range(20):
            report = grad_check(make_block(target, seed=seed), seed=seed, target=target.value)
            assert report.passed, f"seed {seed}: max rel err {report.max_rel_err:.3e}"
