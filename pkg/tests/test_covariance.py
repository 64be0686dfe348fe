import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from clime.covariance import column_moments, default_rho, perturb, sample_covariance, standardize_columns
from clime.exceptions import TooFewSamples, ZeroVariance
from clime.linalg import cholesky, is_positive_definite

import oracles


def test_two_points():
    assert_array_equal(sample_covariance([[1.0], [-1.0]]), [[1.0]])


def test_constant_column_zero():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((10, 3))
    x[:, 1] = 7.0
    s = sample_covariance(x)
    assert_array_equal(s[1], 0)
    assert_array_equal(s[:, 1], 0)


def test_against_loops():
    x = np.random.default_rng(1).standard_normal((20, 4))
    assert_allclose(sample_covariance(x), oracles.covariance_loops(x.tolist()), atol=1e-12)


@given(st.integers(2, 15), st.integers(1, 6), st.integers(0, 1000))
@settings(max_examples=25, deadline=None)
def test_exactly_symmetric(n, p, seed):
    s = sample_covariance(np.random.default_rng(seed).standard_normal((n, p)))
    assert_array_equal(s, s.T)


def test_too_few_rows():
    with pytest.raises(TooFewSamples):
        sample_covariance([[1.0, 2.0]])


def test_perturb():
    s = np.random.default_rng(2).standard_normal((3, 3))
    s = s + s.T
    assert_array_equal(perturb(s, 0.0), s)
    assert_array_equal(perturb(np.eye(3), 0.5), 1.5 * np.eye(3))
    with pytest.raises(ValueError):
        perturb(s, -1.0)


def test_perturb_makes_singular_pd():
    n, p = 10, 30
    s = sample_covariance(np.random.default_rng(3).standard_normal((n, p)))
    assert not is_positive_definite(s)
    cholesky(perturb(s, default_rho(n, p)))


def test_default_rho():
    # log p / n = 1
    assert math.sqrt(100 / 100) == 1.0
    assert default_rho(100, 100) == pytest.approx(0.2146, abs=1e-4)
    with pytest.raises(ValueError):
        default_rho(100, 1)


def test_standardize():
    x = np.random.default_rng(4).standard_normal((6, 2))
    assert_array_equal(standardize_columns(x, np.zeros(2), np.ones(2)), x)
    assert_allclose(standardize_columns([[2.0], [4.0]], [3.0], [1.0]), [[-1.0], [1.0]])


def test_standardize_train_moments():
    rng = np.random.default_rng(5)
    train = rng.normal(3, 2, size=(40, 3))
    means, sds = column_moments(train)
    z = standardize_columns(train, means, sds)
    assert_allclose(z.mean(axis=0), 0, atol=1e-12)
    assert_allclose(z.var(axis=0, ddof=1), 1, atol=1e-12)


def test_standardize_zero_sd():
    with pytest.raises(ZeroVariance):
        standardize_columns(np.ones((3, 2)), [1.0, 1.0], [1.0, 0.0])


@given(st.integers(2, 6), st.floats(0, 3), st.integers(0, 1000))
@settings(max_examples=25, deadline=None)
def test_perturb_raises_min_eigenvalue(p, rho, seed):
    s = sample_covariance(np.random.default_rng(seed).standard_normal((p + 3, p)))
    before = np.linalg.eigvalsh(s)[0]
    assert np.linalg.eigvalsh(perturb(s, rho))[0] >= rho + before - 1e-10


def test_pd_when_n_exceeds_p():
    for seed in range(10):
        cholesky(sample_covariance(np.random.default_rng(seed).standard_normal((12, 8))))
