"""Sample covariance, diagonal perturbation and column standardization."""

import math

import numpy as np

from .exceptions import DimensionMismatch, TooFewSamples, ZeroVariance
from .linalg import as_matrix, check_square


def sample_covariance(x):
    """Covariance of the rows of ``x`` with divisor ``n``.

    The result is exactly symmetric: the upper triangle is computed and
    mirrored.
    """
    x = as_matrix(x, "data")
    n = x.shape[0]
    if n < 2:
        raise TooFewSamples(f"need at least 2 observations, got {n}")
    centered = x - x.mean(axis=0)
    cov = (centered.T @ centered) / n
    upper = np.triu(cov)
    return upper + np.triu(cov, 1).T


def perturb(sigma, rho):
    """Return ``sigma + rho * I``."""
    sigma = check_square(sigma, "sigma")
    if rho < 0:
        raise ValueError(f"rho must be nonnegative, got {rho}")
    out = sigma.copy()
    out[np.diag_indices_from(out)] += rho
    return out


def default_rho(n, p):
    """``sqrt(log(p) / n)`` with the natural logarithm."""
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    if p < 2:
        raise ValueError(f"p must be at least 2, got {p}")
    return math.sqrt(math.log(p) / n)


def column_moments(x):
    """Column means and standard deviations (divisor ``n - 1``)."""
    x = as_matrix(x, "data")
    if x.shape[0] < 2:
        raise TooFewSamples("need at least 2 rows to estimate a standard deviation")
    return x.mean(axis=0), x.std(axis=0, ddof=1)


def standardize_columns(x, means, sds):
    """Map column ``j`` to ``(x_j - means[j]) / sds[j]``."""
    x = as_matrix(x, "data")
    means = np.asarray(means, dtype=np.float64)
    sds = np.asarray(sds, dtype=np.float64)
    p = x.shape[1]
    if means.shape != (p,) or sds.shape != (p,):
        raise DimensionMismatch(f"means/sds must have length {p}")
    bad = np.flatnonzero(sds <= 1e-12)
    if bad.size:
        raise ZeroVariance(f"column {int(bad[0])} has standard deviation {sds[bad[0]]:.3g}")
    return (x - means) / sds
