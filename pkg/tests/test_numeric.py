"""Matrix primitives and seeded randomness."""

import numpy as np
import pytest

from relae.numeric import Rng, as_matrix, matmul, sigmoid, transpose


class TestMatmul:
    def test_identity(self):
        a = np.array([[1.0, 2.0], [3.0, 4.0]])
        np.testing.assert_array_equal(matmul(np.eye(2), a), a)

    def test_hand_arithmetic(self):
        out = matmul(np.array([[1.0, 2.0]]), np.array([[3.0], [4.0]]))
        np.testing.assert_array_equal(out, [[11.0]])

    def test_against_triple_loop_oracle(self):
        rng = Rng(123)
        a = rng.uniform(-2, 2, 5, 7)
        b = rng.uniform(-2, 2, 7, 3)
        expect = np.zeros((5, 3))
        for i in range(5):
            for j in range(3):
                for k in range(7):
                    expect[i, j] += a[i, k] * b[k, j]
        np.testing.assert_allclose(matmul(a, b), expect, rtol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            matmul(np.ones((2, 3)), np.ones((2, 3)))

    def test_associativity(self):
        rng = Rng(7)
        a = rng.uniform(-1, 1, 4, 6)
        b = rng.uniform(-1, 1, 6, 5)
        c = rng.uniform(-1, 1, 5, 3)
        left = matmul(matmul(a, b), c)
        right = matmul(a, matmul(b, c))
        np.testing.assert_allclose(left, right, rtol=1e-9)

    def test_transpose_of_product(self):
        rng = Rng(8)
        a = rng.uniform(-1, 1, 4, 6)
        b = rng.uniform(-1, 1, 6, 5)
        np.testing.assert_allclose(
            transpose(matmul(a, b)),
            matmul(transpose(b), transpose(a)),
            rtol=1e-12,
        )

    def test_rejects_nonfinite(self):
        bad = np.array([[np.inf, 1.0]])
        with pytest.raises(ValueError, match="non-finite"):
            as_matrix(bad)


class TestTranspose:
    def test_small(self):
        np.testing.assert_array_equal(
            transpose(np.array([[1.0, 2.0], [3.0, 4.0]])), [[1.0, 3.0], [2.0, 4.0]]
        )

    def test_one_by_one(self):
        np.testing.assert_array_equal(transpose(np.array([[5.0]])), [[5.0]])

    def test_symmetric_unchanged(self):
        s = np.array([[2.0, 1.0], [1.0, 3.0]])
        np.testing.assert_array_equal(transpose(s), s)

    def test_involution(self):
        a = Rng(3).uniform(-1, 1, 3, 5)
        np.testing.assert_array_equal(transpose(transpose(a)), a)


class TestSigmoid:
    def test_zero_is_half(self):
        assert sigmoid(np.array([[0.0]]))[0, 0] == 0.5

    def test_saturation_is_stable(self):
        out = sigmoid(np.array([[-1000.0, -50.0]]))
        assert np.all(out >= 0.0) and np.all(out < 1e-6)
        assert np.isfinite(out).all()

    def test_symmetry_identity(self):
        x = Rng(4).uniform(-30, 30, 10, 10)
        np.testing.assert_allclose(sigmoid(x) + sigmoid(-x), 1.0, atol=1e-12)

    def test_monotone_on_sorted_input(self):
        x = np.sort(Rng(5).uniform(-800, 800, 1, 1000).ravel())
        out = sigmoid(x.reshape(1, -1)).ravel()
        assert np.all(np.diff(out) >= 0)


class TestRng:
    def test_uniform_interval_and_determinism(self):
        a = Rng(99).uniform(-0.5, 0.5, 10, 10)
        b = Rng(99).uniform(-0.5, 0.5, 10, 10)
        np.testing.assert_array_equal(a, b)
        assert a.min() >= -0.5 and a.max() < 0.5

    def test_uniform_rejects_degenerate_interval(self):
        with pytest.raises(ValueError, match="interval"):
            Rng(1).uniform(0.3, 0.3, 2, 2)

    def test_uniform_mean_large_sample(self):
        # law of large numbers: 1e4 draws from U[-0.5, 0.5]
        draws = Rng(2024).uniform(-0.5, 0.5, 100, 100)
        assert abs(draws.mean()) < 0.02

    def test_gaussian_zero_stddev_is_constant(self):
        out = Rng(1).gaussian(3.0, 0.0, 4, 5)
        np.testing.assert_array_equal(out, np.full((4, 5), 3.0))

    def test_gaussian_rejects_negative_stddev(self):
        with pytest.raises(ValueError, match="stddev"):
            Rng(1).gaussian(0.0, -1.0, 2, 2)

    def test_gaussian_variance_large_sample(self):
        draws = Rng(31337).gaussian(0.0, 1.0, 1000, 100)
        assert abs(draws.var() - 1.0) < 0.05

    def test_gaussian_determinism(self):
        a = Rng(5).gaussian(0.0, 2.0, 6, 6)
        b = Rng(5).gaussian(0.0, 2.0, 6, 6)
        np.testing.assert_array_equal(a, b)

    def test_derived_streams_are_independent_of_parent_use(self):
        r1 = Rng(10)
        r1.uniform(0, 1, 5, 5)  # consume from the parent
        a = r1.derive(3).uniform(0, 1, 4, 4)
        b = Rng(10).derive(3).uniform(0, 1, 4, 4)
        np.testing.assert_array_equal(a, b)

    def test_different_paths_differ(self):
        a = Rng(10).derive(1).uniform(0, 1, 4, 4)
        b = Rng(10).derive(2).uniform(0, 1, 4, 4)
        assert not np.array_equal(a, b)

    def test_child_seed_deterministic(self):
        assert Rng(7).child_seed(1, 2) == Rng(7).child_seed(1, 2)
        assert Rng(7).child_seed(1, 2) != Rng(7).child_seed(2, 1)

    def test_permutation_deterministic(self):
        np.testing.assert_array_equal(Rng(3).permutation(20), Rng(3).permutation(20))
