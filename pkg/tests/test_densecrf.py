"""Tests for mean-field inference and its gradients."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from permutofilt.crf import (
    DenseKernel,
    LatticeKernel,
    MarginalState,
    mf_backward,
    mf_init,
    mf_run,
    mf_step,
    potts,
)
from permutofilt.errors import ShapeMismatchError, StateMissingError
from permutofilt.ops.filter_bank import FilterBank, gaussian_init
from permutofilt.ops.permuto import build_operators, dense_operator
from permutofilt.training.blocks import CrfBlock, random_bank
from permutofilt.training.gradcheck import grad_check
from tests.oracles import mean_field_step_loops


def lattice_kernel(rng, n, d=2, weight=1.0, normalize=False):
    features = rng.uniform(0.0, 3.0, size=(n, d))
    return LatticeKernel.from_features(
        features, 1.0, gaussian_init(d, 1, 1.0), weight=weight, normalize=normalize
    )


class TestMeanFieldStep:
    """Tests for a single update."""

    def test_matches_explicit_sums(self, rng):
        for _ in range(20):
            n = int(rng.integers(2, 9))
            num_labels = int(rng.integers(2, 5))
            features = rng.uniform(0.0, 3.0, size=(n, 2))
            ops = build_operators(features, 1.0, 1)
            bank = FilterBank(weights=rng.normal(size=(1, 1, 7)), d=2, s=1)
            kernel = LatticeKernel(ops=ops, bank=bank, weight=float(rng.uniform(0.5, 2.0)))
            unaries = rng.normal(size=(n, num_labels))
            compat = rng.uniform(0.0, 1.0, size=(num_labels, num_labels))
            q = mf_init(unaries).q
            matrix = dense_operator(ops, bank)[0, 0]
            expected = mean_field_step_loops(q, unaries, [matrix], [kernel.weight], compat)
            out = mf_step(MarginalState(q=q), unaries, [kernel], compat)
            assert_allclose(out.q, expected, atol=1e-10)

    def test_zero_weight_keeps_the_unary_softmax(self, rng):
        unaries = rng.normal(size=(10, 3))
        kernel = lattice_kernel(rng, 10, weight=0.0)
        init = mf_init(unaries)
        out = mf_step(init, unaries, [kernel], potts(3))
        assert_allclose(out.q, init.q, atol=1e-15)

    def test_compat_shape_is_checked(self, rng):
        unaries = rng.normal(size=(5, 3))
        with pytest.raises(ShapeMismatchError):
            mf_step(mf_init(unaries), unaries, [lattice_kernel(rng, 5)], np.zeros((2, 2)))

    def test_kernel_size_is_checked(self, rng):
        unaries = rng.normal(size=(5, 2))
        with pytest.raises(ShapeMismatchError):
            mf_step(mf_init(unaries), unaries, [lattice_kernel(rng, 6)], potts(2))


class TestMeanFieldRun:
    """Tests for unrolled inference."""

    def test_marginals_stay_row_stochastic(self, rng):
        unaries = 3.0 * rng.normal(size=(40, 4))
        kernel = lattice_kernel(rng, 40, weight=5.0)
        for steps in range(1, 11):
            q = mf_run(unaries, [kernel], steps=steps).q
            assert np.all(q >= 0.0)
            assert_allclose(q.sum(axis=1), 1.0, atol=1e-12)

    def test_lattice_and_materialized_kernels_agree(self, rng):
        unaries = rng.normal(size=(15, 3))
        kernel = lattice_kernel(rng, 15, weight=2.0)
        dense = DenseKernel.from_lattice(kernel)
        a = mf_run(unaries, [kernel], steps=4, exclude_self=True).q
        b = mf_run(unaries, [dense], steps=4, exclude_self=True).q
        assert_allclose(a, b, atol=1e-12)

    def test_exclude_self_removes_the_diagonal(self, rng):
        unaries = rng.normal(size=(12, 2))
        kernel = lattice_kernel(rng, 12, weight=1.5)
        matrix = DenseKernel.from_lattice(kernel).matrix
        off_diagonal = DenseKernel(matrix=matrix - np.diag(np.diag(matrix)), weight=1.5)
        a = mf_run(unaries, [kernel], steps=3, exclude_self=True).q
        b = mf_run(unaries, [off_diagonal], steps=3).q
        assert_allclose(a, b, atol=1e-12)

    def test_normalized_kernel_rows_sum_to_one(self, rng):
        kernel = lattice_kernel(rng, 20, normalize=True)
        assert_allclose(DenseKernel.from_lattice(kernel).matrix.sum(axis=1), 1.0, atol=1e-12)

    def test_loose_needs_one_set_per_step(self, rng):
        unaries = rng.normal(size=(6, 2))
        kernel = lattice_kernel(rng, 6)
        with pytest.raises(ShapeMismatchError):
            mf_run(unaries, [[kernel], [kernel]], steps=3, loose=True)

    def test_loose_with_identical_sets_matches_tied(self, rng):
        unaries = rng.normal(size=(8, 3))
        kernel = lattice_kernel(rng, 8, weight=2.0)
        tied = mf_run(unaries, [kernel], steps=3).q
        loose = mf_run(unaries, [[kernel]] * 3, steps=3, loose=True).q
        assert_allclose(tied, loose, atol=1e-15)

    def test_two_steps_compose_single_updates(self, rng):
        unaries = rng.normal(size=(14, 3))
        kernels = [lattice_kernel(rng, 14, weight=2.0), lattice_kernel(rng, 14, d=3, weight=0.5)]
        compat = rng.uniform(0.0, 1.0, size=(3, 3))
        state = mf_init(unaries)
        for _ in range(2):
            state = mf_step(state, unaries, kernels, compat, exclude_self=True)
        run = mf_run(unaries, kernels, compat=compat, steps=2, exclude_self=True)
        assert_allclose(run.q, state.q, rtol=0.0, atol=1e-15)

    @pytest.mark.parametrize("exclude_self", [False, True])
    def test_relabeling_permutes_the_marginals(self, rng, exclude_self):
        unaries = rng.normal(size=(12, 4))
        compat = rng.uniform(0.0, 2.0, size=(4, 4))
        kernel = lattice_kernel(rng, 12, weight=3.0)
        perm = np.array([2, 0, 3, 1])
        q = mf_run(unaries, [kernel], compat=compat, steps=3, exclude_self=exclude_self).q
        q_perm = mf_run(
            unaries[:, perm],
            [kernel],
            compat=compat[np.ix_(perm, perm)],
            steps=3,
            exclude_self=exclude_self,
        ).q
        assert_allclose(q_perm, q[:, perm], atol=1e-12)

    def test_labels(self):
        state = MarginalState(q=np.array([[0.2, 0.8], [0.6, 0.4]]))
        assert state.labels.tolist() == [1, 0]

    def test_rejects_zero_steps(self, rng):
        with pytest.raises(ValueError):
            mf_run(rng.normal(size=(4, 2)), [lattice_kernel(rng, 4)], steps=0)


class TestMeanFieldBackward:
    """Tests for reverse-mode through mean-field."""

    def test_needs_a_recorded_state(self, rng):
        unaries = rng.normal(size=(6, 2))
        state = mf_run(unaries, [lattice_kernel(rng, 6)], steps=2)
        with pytest.raises(StateMissingError):
            mf_backward(np.ones((6, 2)), state)

    def test_gradient_shapes(self, rng):
        unaries = rng.normal(size=(9, 3))
        state = mf_run(unaries, [lattice_kernel(rng, 9)], steps=2, record=True)
        grads = mf_backward(np.ones((9, 3)), state)
        assert grads.unaries.shape == (9, 3)
        assert grads.compat.shape == (3, 3)
        assert grads.filters[0][0].shape == (1, 1, 7)
        assert grads.kernel_weights[0].shape == (1,)

    def test_dense_kernels_report_no_filter_gradient(self, rng):
        unaries = rng.normal(size=(5, 2))
        dense = DenseKernel.from_gaussian(rng.normal(size=(5, 2)), 1.0)
        grads = mf_backward(np.ones((5, 2)), mf_run(unaries, [dense], steps=2, record=True))
        assert grads.filters[0][0] is None

    @pytest.mark.parametrize(
        ("exclude_self", "normalize"), [(False, False), (True, False), (False, True), (True, True)]
    )
    def test_gradients_match_finite_differences(self, exclude_self, normalize):
        for seed in range(5):
            rng = np.random.default_rng(seed)
            features = rng.uniform(0.0, 2.0, size=(10, 2))
            block = CrfBlock(
                ops=build_operators(features, 1.0, 1),
                bank=random_bank(rng, 2, 1),
                unaries=rng.normal(size=(10, 3)),
                projection=rng.normal(size=(10, 3)),
                steps=3,
                exclude_self=exclude_self,
                normalize=normalize,
            )
            assert grad_check(block, seed=seed).passed


class TestDenseKernel:
    """Tests for explicit affinity matrices."""

    def test_gaussian_is_symmetric_with_unit_diagonal(self, rng):
        matrix = DenseKernel.from_gaussian(rng.normal(size=(7, 3)), 0.5).matrix
        assert_allclose(matrix, matrix.T)
        assert_allclose(np.diag(matrix), 1.0)

    def test_rejects_non_square(self):
        with pytest.raises(ShapeMismatchError):
            DenseKernel(matrix=np.zeros((2, 3)))

    def test_lattice_kernel_needs_scalar_bank(self, rng):
        ops = build_operators(rng.normal(size=(4, 2)), 1.0, 1)
        with pytest.raises(ShapeMismatchError):
            LatticeKernel(ops=ops, bank=FilterBank.identity(2, 1, channels=2))
