import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from clime.core import choose_rho, clime, elementwise_l1_of_estimate, estimate_columns, symmetrize
from clime.covariance import default_rho, sample_covariance
from clime.exceptions import SolverFailure
from clime.lp_solver import ColumnLp, SolverOptions, simplex_oracle
from clime.simulation import model1_precision

import oracles


def random_spd(p, seed):
    a = np.random.default_rng(seed).standard_normal((p, p))
    s = a @ a.T / p + 0.2 * np.eye(p)
    return (s + s.T) / 2


class TestEstimateColumns:
    def test_identity(self):
        omega1, sols = estimate_columns(np.eye(3), 0.0)
        assert_allclose(omega1, np.eye(3), atol=1e-10)
        assert all(s.ok for s in sols)

    def test_decoupled_diagonal(self):
        omega1, _ = estimate_columns(np.diag([2.0, 4.0]), 0.2)
        assert_allclose(omega1, np.diag([0.4, 0.2]), atol=1e-8)

    def test_columns_match_simplex(self):
        sigma = random_spd(5, 0)
        omega1, _ = estimate_columns(sigma, 0.05)
        for j in range(5):
            ref = simplex_oracle(ColumnLp(sigma, j, 0.05)).objective
            assert np.abs(omega1[:, j]).sum() == pytest.approx(ref, abs=1e-6)

    def test_feasible(self):
        sigma = random_spd(6, 1)
        omega1, _ = estimate_columns(sigma, 0.1)
        assert np.abs(sigma @ omega1 - np.eye(6)).max() <= 0.1 + 1e-6

    def test_threads_do_not_change_result(self):
        sigma = random_spd(70, 2)
        a, _ = estimate_columns(sigma, 0.07, workers=1)
        b, _ = estimate_columns(sigma, 0.07, workers=3)
        assert_array_equal(a, b)

    def test_strict_failure_names_column(self):
        x = np.random.default_rng(0).standard_normal((3, 6))
        with pytest.raises(SolverFailure) as info:
            estimate_columns(x.T @ x / 3, 0.01, strict=True)
        assert info.value.column is not None


class TestSymmetrize:
    def test_smaller_magnitude(self):
        assert_array_equal(symmetrize([[1, 0.5], [0.3, 1]]), [[1, 0.3], [0.3, 1]])

    def test_tie_takes_upper(self):
        assert_array_equal(symmetrize([[1, 0.5], [-0.5, 1]]), [[1, 0.5], [0.5, 1]])

    def test_fixed_point(self):
        s = random_spd(4, 3)
        assert_array_equal(symmetrize(s), s)

    @given(st.integers(1, 7), st.integers(0, 10_000))
    @settings(max_examples=30, deadline=None)
    def test_properties(self, p, seed):
        a = np.random.default_rng(seed).standard_normal((p, p))
        out = symmetrize(a)
        assert_array_equal(out, out.T)
        assert np.all(np.abs(out) <= np.maximum(np.abs(a), np.abs(a.T)))
        assert np.all(np.abs(out) == np.minimum(np.abs(a), np.abs(a.T)))


class TestClime:
    def test_identity(self):
        est = clime(np.eye(4), 0.0)
        assert_allclose(est.omega, np.eye(4), atol=1e-10)
        assert est.ok

    def test_one_dim(self):
        assert_allclose(clime([[2.0]], 0.5).omega, [[0.25]], atol=1e-8)

    def test_recovers_inverse_at_zero_lambda(self):
        omega0 = model1_precision(8)
        sigma0 = np.linalg.inv(omega0)
        sigma0 = (sigma0 + sigma0.T) / 2
        est = clime(sigma0, 0.0)
        assert np.abs(est.omega - omega0).max() <= 1e-4

    def test_bitwise_symmetric(self):
        x = np.random.default_rng(4).standard_normal((40, 6))
        omega = clime(sample_covariance(x), 0.1).omega
        assert np.array_equal(omega, omega.T)

    def test_rho_perturbs(self):
        s = random_spd(3, 5)
        a = clime(s, 0.05, rho=0.3).raw
        b = clime(s + 0.3 * np.eye(3), 0.05).raw
        assert_allclose(a, b, atol=1e-12)

    def test_singular_with_rho(self):
        x = np.random.default_rng(6).standard_normal((10, 20))
        s = sample_covariance(x)
        rho = choose_rho(s, 10)
        assert rho == default_rho(10, 20)
        est = clime(s, 0.3, rho=rho)
        assert est.ok
        assert est.failed_columns == []

    def test_choose_rho_pd(self):
        assert choose_rho(np.eye(3)) == 0.0
        with pytest.raises(ValueError):
            choose_rho(np.ones((3, 3)))

    def test_diagnostics(self):
        d = clime(np.eye(2), 0.1).diagnostics()
        assert d["all_optimal"] is True
        assert len(d["columns"]) == 2
        assert d["columns"][0]["status"] == "optimal"

    def test_flags_failed_columns(self):
        est = clime(np.eye(3), 0.1, opts=SolverOptions(max_iter=1))
        assert not est.ok

    def test_bad_args(self):
        with pytest.raises(ValueError):
            clime(np.eye(2), -1.0)
        with pytest.raises(ValueError):
            clime(np.eye(2), 0.1, rho=-1.0)


def test_elementwise_l1():
    assert elementwise_l1_of_estimate(np.eye(3)) == 3
    assert elementwise_l1_of_estimate(np.zeros((2, 2))) == 0
    a = np.random.default_rng(7).standard_normal((4, 4))
    assert elementwise_l1_of_estimate(a) == pytest.approx(oracles.sum_abs_loops(a))
