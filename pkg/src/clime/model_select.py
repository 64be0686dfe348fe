"""Thresholding, sign patterns and support-recovery rates."""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import AllZero, DimensionMismatch
from .linalg import as_matrix, matrix_l1_norm

NONZERO_TOL = 1e-3


def threshold(omega_hat, tau):
    """Zero every entry (diagonal included) with magnitude below ``tau``."""
    if tau < 0:
        raise ValueError(f"tau must be nonnegative, got {tau}")
    omega_hat = as_matrix(omega_hat)
    return np.where(np.abs(omega_hat) >= tau, omega_hat, 0.0)


@dataclass(frozen=True)
class SupportPattern:
    """Entrywise signs in {-1, 0, +1}."""

    signs: np.ndarray

    @property
    def support(self):
        return self.signs != 0

    @property
    def shape(self):
        return self.signs.shape

    def nonzero_count(self):
        return int(np.count_nonzero(self.signs))

    def with_diagonal(self):
        """Copy with every diagonal position marked +1 (if it was 0)."""
        signs = self.signs.copy()
        d = np.diag_indices(min(signs.shape))
        signs[d] = np.where(signs[d] == 0, 1, signs[d])
        return SupportPattern(signs)

    def __eq__(self, other):
        return isinstance(other, SupportPattern) and np.array_equal(self.signs, other.signs)

    __hash__ = None


def sign_pattern(a, zero_tol=NONZERO_TOL):
    """Signs of ``a``; entries with ``|a_ij| <= zero_tol`` count as zero."""
    if zero_tol < 0:
        raise ValueError("zero_tol must be nonnegative")
    a = as_matrix(a)
    signs = np.sign(a).astype(np.int8)
    signs[np.abs(a) <= zero_tol] = 0
    return SupportPattern(signs)


@dataclass(frozen=True)
class RecoveryMetrics:
    """Entry counts and rates; a rate is ``None`` when its denominator is 0."""

    tp: int
    tn: int
    fp: int
    fn: int
    tn_rate: Optional[float]
    tp_rate: Optional[float]
    fpr: Optional[float]

    @property
    def tpr(self):
        return self.tp_rate


def recovery_metrics(estimated, truth, include_diagonal=True):
    """Compare supports entrywise over the p x p grid.

    Rates are fractions in [0, 1]: ``tn_rate = TN / true zeros``,
    ``tp_rate = TP / true nonzeros`` and ``fpr = FP / true zeros``.
    """
    if estimated.shape != truth.shape:
        raise DimensionMismatch(f"pattern shapes differ: {estimated.shape} vs {truth.shape}")
    est = estimated.support
    tru = truth.support
    if not include_diagonal:
        mask = ~np.eye(est.shape[0], est.shape[1], dtype=bool)
        est, tru = est[mask], tru[mask]
    tp = int(np.sum(est & tru))
    tn = int(np.sum(~est & ~tru))
    fp = int(np.sum(est & ~tru))
    fn = int(np.sum(~est & tru))
    zeros = tn + fp
    nonzeros = tp + fn
    return RecoveryMetrics(
        tp=tp,
        tn=tn,
        fp=fp,
        fn=fn,
        tn_rate=tn / zeros if zeros else None,
        tp_rate=tp / nonzeros if nonzeros else None,
        fpr=fp / zeros if zeros else None,
    )


def theta_min(omega0):
    """Smallest nonzero magnitude of ``omega0``."""
    mags = np.abs(as_matrix(omega0))
    nz = mags[mags > 0]
    if nz.size == 0:
        raise AllZero("matrix has no nonzero entry")
    return float(nz.min())


def default_tau(m_bound, lam):
    """Threshold level ``4 * M * lambda``."""
    if m_bound <= 0:
        raise ValueError("m_bound must be positive")
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    return 4.0 * m_bound * lam


def estimated_m_bound(omega_hat):
    """Plug-in for the unknown ``M``: the matrix l1 norm of the estimate."""
    return matrix_l1_norm(omega_hat)
