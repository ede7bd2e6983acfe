"""
tests/test_linalg.py – Unit tests for core/linalg.py.
Cases: QR least squares, rank detection, compound-symmetry inverse.
"""
import numpy as np
import pytest

from confound_bench.core.linalg import (
    CompoundSymmetryKernel,
    cluster_means,
    kernel_inverse_apply,
    kernel_inverse_sqrt_apply,
    least_squares,
    solve_least_squares,
)
from confound_bench.errors import NotPositiveDefinite, SingularDesign


class TestLeastSquares:
    def test_small_worked_example(self):
        X = np.array([[1.0, 1.0], [1.0, 2.0], [1.0, 3.0]])
        coef = solve_least_squares(X, np.array([1.0, 2.0, 4.0]))
        assert coef == pytest.approx([-2 / 3, 1.5], abs=1e-12)

    def test_xtx_inv_matches_direct_inverse(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(50, 4))
        sol = least_squares(X, rng.normal(size=50))
        assert np.allclose(sol.xtx_inv, np.linalg.inv(X.T @ X), atol=1e-10)

    def test_residuals_orthogonal_to_design(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(30, 3))
        sol = least_squares(X, rng.normal(size=30))
        assert np.allclose(X.T @ sol.residuals, 0.0, atol=1e-10)

    @pytest.mark.parametrize("X", [
        np.array([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]]),    # collinear
        np.zeros((4, 2)),                                  # identically zero
        np.ones((1, 2)),                                   # fewer rows than columns
    ])
    def test_singular_designs_raise(self, X):
        with pytest.raises(SingularDesign):
            least_squares(X, np.ones(X.shape[0]))

    def test_shape_mismatch_is_value_error(self):
        with pytest.raises(ValueError):
            least_squares(np.ones((3, 1)), np.ones(4))

    def test_condition_number_of_orthonormal_design_is_one(self):
        sol = least_squares(np.eye(3), np.ones(3))
        assert sol.condition_number == pytest.approx(1.0)


class TestCompoundSymmetry:
    def test_s_for_unit_components(self):
        k = CompoundSymmetryKernel(sigma_within2=1.0, sigma_between2=1.0, n=2)
        assert k.s == pytest.approx(1 / 3)

    def test_inverse_matches_dense_solve(self):
        k = CompoundSymmetryKernel(sigma_within2=1.3, sigma_between2=0.7, n=5)
        M = np.random.default_rng(3).normal(size=(5, 3))
        assert np.allclose(kernel_inverse_apply(k, M), np.linalg.solve(k.dense(), M), atol=1e-12)

    @pytest.mark.parametrize("n", [1, 2, 5, 50])
    def test_round_trip_across_cluster_sizes(self, n):
        k = CompoundSymmetryKernel(sigma_within2=0.8, sigma_between2=1.7, n=n)
        M = np.random.default_rng(n).normal(size=(n, 3))
        assert np.allclose(kernel_inverse_apply(k, M), np.linalg.solve(k.dense(), M), atol=1e-12)
        assert np.allclose(k.dense() @ kernel_inverse_apply(k, M), M, atol=1e-10)

    def test_s_stays_below_reciprocal_cluster_size(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            k = CompoundSymmetryKernel(
                sigma_within2=float(rng.uniform(1e-3, 10.0)),
                sigma_between2=float(rng.choice([0.0, rng.uniform(0.0, 10.0)])),
                n=int(rng.integers(1, 200)),
            )
            assert 0.0 <= k.s < 1.0 / k.n

    @pytest.mark.parametrize("n", [1, 3, 20])
    def test_whitening_squares_to_inverse(self, n):
        k = CompoundSymmetryKernel(sigma_within2=1.3, sigma_between2=0.6, n=n)
        root = kernel_inverse_sqrt_apply(k, np.eye(n))
        assert np.allclose(root, root.T)
        assert np.allclose(root @ root, np.linalg.inv(k.dense()), atol=1e-12)

    def test_whitening_with_dominant_between_variance(self):
        # σb²/σw² = 1e12: √(1 − n·s) would lose about four digits here
        k = CompoundSymmetryKernel(sigma_within2=1.0, sigma_between2=1e12, n=4)
        out = kernel_inverse_sqrt_apply(k, np.ones(4))
        assert out == pytest.approx(np.full(4, 1.0 / np.sqrt(1.0 + 4e12)), rel=1e-12)
        step = np.array([1.0, -1.0, 0.0, 0.0])
        assert kernel_inverse_sqrt_apply(k, step) == pytest.approx(step, rel=1e-12)

    def test_vector_and_stack_layouts(self):
        k = CompoundSymmetryKernel(sigma_within2=2.0, sigma_between2=0.5, n=4)
        rng = np.random.default_rng(4)
        v = rng.normal(size=4)
        stack = rng.normal(size=(6, 4, 2))
        assert np.allclose(kernel_inverse_apply(k, v), np.linalg.solve(k.dense(), v))
        out = kernel_inverse_apply(k, stack)
        for i in range(6):
            assert np.allclose(out[i], np.linalg.solve(k.dense(), stack[i]))

    def test_zero_between_variance_is_scaled_identity(self):
        k = CompoundSymmetryKernel(sigma_within2=4.0, sigma_between2=0.0, n=3)
        M = np.arange(6.0).reshape(3, 2)
        assert np.allclose(kernel_inverse_apply(k, M), M / 4.0)

    def test_not_positive_definite(self):
        with pytest.raises(NotPositiveDefinite):
            kernel_inverse_apply(CompoundSymmetryKernel(0.0, 1.0, 3), np.ones(3))

    def test_wrong_size_raises(self):
        with pytest.raises(ValueError):
            kernel_inverse_apply(CompoundSymmetryKernel(1.0, 1.0, 3), np.ones(4))


class TestClusterMeans:
    def test_row_means(self):
        assert cluster_means(np.array([[1.0, 3.0], [2.0, 2.0]])) == pytest.approx([2.0, 2.0])

    def test_needs_matrix(self):
        with pytest.raises(ValueError):
            cluster_means(np.ones(3))
