"""Dense matrix helpers: factorizations and the matrix norms used for losses.

Matrices are plain 2-D ``numpy.ndarray`` of float64. Factorizations are
delegated to LAPACK through numpy/scipy; the positive-definiteness rule and
the spectral norm (power iteration) are implemented here.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import (
    DimensionMismatch,
    NonConvergence,
    NotPositiveDefinite,
    NotSymmetric,
)

SYMMETRY_TOL = 1e-10
PIVOT_RTOL = 1e-12


def as_matrix(a, name="matrix"):
    """Return ``a`` as a finite 2-D float64 array (copying only if needed)."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] == 0 or a.shape[1] == 0:
        raise DimensionMismatch(f"{name} must be a non-empty 2-D array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def check_square(a, name="matrix"):
    a = as_matrix(a, name)
    if a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {a.shape}")
    return a


def check_symmetric(a, name="matrix", tol=SYMMETRY_TOL):
    a = check_square(a, name)
    asym = np.max(np.abs(a - a.T))
    if asym > tol:
        raise NotSymmetric(f"{name} is not symmetric (max |a_ij - a_ji| = {asym:.3g})")
    return a


def matmul(a, b):
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise DimensionMismatch(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


@dataclass(frozen=True)
class CholeskyFactor:
    """Lower-triangular ``L`` with ``L @ L.T`` equal to the factored matrix."""

    lower: np.ndarray

    @property
    def dim(self):
        return self.lower.shape[0]

    def reconstruct(self):
        return self.lower @ self.lower.T

    def solve(self, b):
        return scipy.linalg.cho_solve((self.lower, True), b, check_finite=False)

    def log_det(self):
        return 2.0 * float(np.sum(np.log(np.diag(self.lower))))


def cholesky(a):
    """Cholesky factor of a symmetric positive definite matrix.

    Raises
    ------
    NotPositiveDefinite
        If a pivot ``L_jj**2`` is at most ``1e-12`` times the largest
        diagonal entry of ``a`` (or LAPACK reports a non-positive pivot).
    """
    a = check_symmetric(a)
    scale = np.max(np.diag(a))
    if scale <= 0:
        raise NotPositiveDefinite("matrix has no positive diagonal entry")
    try:
        lower = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None
    pivots = np.diag(lower) ** 2
    if np.any(pivots <= PIVOT_RTOL * scale):
        j = int(np.argmin(pivots))
        raise NotPositiveDefinite(f"pivot {j} is {pivots[j]:.3g}, below {PIVOT_RTOL:g} x max diagonal")
    return CholeskyFactor(lower)


def is_positive_definite(a):
    try:
        cholesky(a)
    except (NotPositiveDefinite, NotSymmetric):
        return False
    return True


def solve_spd(a, b):
    """Solve ``a @ x = b`` for symmetric positive definite ``a``."""
    factor = cholesky(a)
    b = np.asarray(b, dtype=np.float64)
    if b.shape[0] != factor.dim:
        raise DimensionMismatch(f"rhs has {b.shape[0]} rows, matrix is {factor.dim}x{factor.dim}")
    return factor.solve(b)


def log_det(a):
    return cholesky(a).log_det()


def _power_top_singular(a, v, tol, max_iter):
    """Power iteration on ``a.T @ a``; returns (sigma, converged)."""
    v = v / np.linalg.norm(v)
    sigma = 0.0
    for _ in range(max_iter):
        w = a @ v
        new_sigma = np.linalg.norm(w)
        if new_sigma == 0.0:
            return 0.0, True
        v = a.T @ w
        v /= np.linalg.norm(v)
        if abs(new_sigma - sigma) <= tol * new_sigma:
            return float(new_sigma), True
        sigma = new_sigma
    return float(sigma), False


def spectral_norm(a, tol=1e-10, max_iter=10000, seed=0):
    """Largest singular value of a square matrix by power iteration.

    The iteration starts from the normalized all-ones vector and is repeated
    from a seeded Gaussian start; the larger of the two estimates is kept,
    which guards against a start orthogonal to the top singular vector.

    Raises
    ------
    NonConvergence
        When neither start reaches relative change ``tol`` within
        ``max_iter`` steps. The best estimate is attached.
    """
    a = check_square(a)
    if not np.any(a):
        return 0.0
    p = a.shape[0]
    s1, ok1 = _power_top_singular(a, np.ones(p), tol, max_iter)
    v2 = np.random.default_rng(seed).standard_normal(p)
    s2, ok2 = _power_top_singular(a, v2, tol, max_iter)
    best = max(s1, s2)
    if not (ok1 or ok2):
        raise NonConvergence(f"power iteration did not converge in {max_iter} steps", estimate=best)
    return best


def matrix_l1_norm(a):
    """Maximum absolute column sum."""
    return float(np.max(np.sum(np.abs(as_matrix(a)), axis=0)))


def frobenius_norm(a):
    return float(np.sqrt(np.sum(as_matrix(a) ** 2)))


def elementwise_inf_norm(a):
    return float(np.max(np.abs(as_matrix(a))))


def elementwise_l1_norm(a):
    return float(np.sum(np.abs(as_matrix(a))))
