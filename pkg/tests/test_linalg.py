import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from clime.exceptions import DimensionMismatch, NotPositiveDefinite, NotSymmetric
from clime.linalg import (
    as_matrix,
    check_symmetric,
    cholesky,
    elementwise_inf_norm,
    elementwise_l1_norm,
    frobenius_norm,
    is_positive_definite,
    log_det,
    matmul,
    matrix_l1_norm,
    solve_spd,
    spectral_norm,
)
from clime.simulation import model1_precision, model3_precision

import oracles


def random_spd(p, seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((p, p))
    return a @ a.T + p * np.eye(p)


class TestMatrixChecks:
    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            as_matrix([[1.0, np.nan]])

    def test_rejects_wrong_rank(self):
        with pytest.raises(DimensionMismatch):
            as_matrix(np.ones(3))

    def test_asymmetric(self):
        with pytest.raises(NotSymmetric):
            check_symmetric([[1.0, 0.1], [0.0, 1.0]])


class TestMatmul:
    def test_identity(self):
        a = np.arange(9.0).reshape(3, 3)
        assert_array_equal(matmul(np.eye(3), a), a)

    def test_hand(self):
        assert_array_equal(matmul([[1, 2], [3, 4]], [[1], [1]]), [[3], [7]])

    def test_against_loops(self):
        rng = np.random.default_rng(0)
        a, b = rng.standard_normal((5, 4)), rng.standard_normal((4, 3))
        assert_allclose(matmul(a, b), oracles.matmul_loops(a, b), atol=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            matmul(np.ones((2, 3)), np.ones((2, 3)))


class TestCholesky:
    def test_identity(self):
        assert_array_equal(cholesky(np.eye(4)).lower, np.eye(4))

    def test_hand(self):
        assert_allclose(cholesky([[4, 2], [2, 3]]).lower, [[2, 0], [1, math.sqrt(2)]], atol=1e-15)

    def test_model1_ok_model3_shifted_fails(self):
        cholesky(model1_precision(10))
        shifted = model3_precision(10) - 0.6 * np.eye(10)
        assert oracles.jacobi_eigenvalues(shifted)[0] == pytest.approx(-0.1)
        with pytest.raises(NotPositiveDefinite):
            cholesky(shifted)

    @given(st.integers(1, 8), st.integers(0, 10_000))
    @settings(max_examples=30, deadline=None)
    def test_reconstructs(self, p, seed):
        a = random_spd(p, seed)
        fac = cholesky(a)
        assert np.all(np.diag(fac.lower) > 0)
        assert np.linalg.norm(fac.reconstruct() - a) <= 1e-10 * np.linalg.norm(a)

    def test_singular(self):
        assert not is_positive_definite(np.ones((3, 3)))


class TestSolveAndLogDet:
    def test_identity(self):
        b = np.arange(6.0).reshape(3, 2)
        assert_allclose(solve_spd(np.eye(3), b), b)

    def test_diagonal(self):
        assert_allclose(solve_spd([[2, 0], [0, 4]], [[1], [1]]), [[0.5], [0.25]])

    def test_residual(self):
        a = random_spd(6, 1)
        b = np.random.default_rng(2).standard_normal((6, 2))
        assert np.abs(a @ solve_spd(a, b) - b).max() < 1e-10

    def test_log_det_simple(self):
        assert log_det(np.eye(5)) == 0.0
        assert log_det(np.diag([2.0, 3.0])) == pytest.approx(math.log(6))

    def test_log_det_model3(self):
        m = model3_precision(5)
        assert_allclose(oracles.jacobi_eigenvalues(m), [0.5] * 4 + [3.0], atol=1e-12)
        assert log_det(m) == pytest.approx(math.log(3 * 0.5**4), abs=1e-12)


class TestNorms:
    def test_spectral_simple(self):
        assert spectral_norm(np.eye(4)) == pytest.approx(1.0)
        assert spectral_norm(np.diag([3.0, -5.0])) == pytest.approx(5.0)

    @pytest.mark.parametrize("seed", range(5))
    def test_spectral_jacobi(self, seed):
        a = np.random.default_rng(seed).standard_normal((8, 8))
        a = a + a.T
        expected = np.abs(oracles.jacobi_eigenvalues(a)).max()
        assert spectral_norm(a) == pytest.approx(expected, abs=1e-8)

    def test_spectral_zero(self):
        assert spectral_norm(np.zeros((3, 3))) == 0.0

    def test_l1(self):
        assert matrix_l1_norm(np.eye(4)) == 1.0
        assert matrix_l1_norm([[1, -2], [3, 4]]) == 6.0
        a = np.random.default_rng(3).standard_normal((7, 7))
        assert matrix_l1_norm(a) == pytest.approx(oracles.matrix_l1_loops(a), abs=1e-12)

    def test_elementwise(self):
        z = np.zeros((3, 3))
        assert (frobenius_norm(z), elementwise_inf_norm(z), elementwise_l1_norm(z)) == (0, 0, 0)
        i3 = np.eye(3)
        assert frobenius_norm(i3) == pytest.approx(math.sqrt(3))
        assert elementwise_inf_norm(i3) == 1
        assert elementwise_l1_norm(i3) == 3
        a = np.random.default_rng(4).standard_normal((5, 5))
        assert frobenius_norm(a) == pytest.approx(oracles.frobenius_loops(a), abs=1e-12)
        assert elementwise_inf_norm(a) == oracles.max_abs_loops(a)
        assert elementwise_l1_norm(a) == pytest.approx(oracles.sum_abs_loops(a), abs=1e-12)
