"""Sparse precision matrix estimation by constrained l1 minimization (CLIME).

Typical use::

    from clime import clime, sample_covariance
    est = clime(sample_covariance(x), lam=0.1)
    est.omega
"""

__version__ = "0.1.0"

from .core import PrecisionEstimate, clime, estimate_columns, symmetrize
from .covariance import default_rho, perturb, sample_covariance, standardize_columns
from .lp_solver import ColumnLp, LpSolution, LpStatus, SolverOptions, simplex_oracle, solve_column
from .model_select import SupportPattern, recovery_metrics, sign_pattern, threshold
from .refit import refit, refitted_clime

__all__ = [
    "ColumnLp",
    "LpSolution",
    "LpStatus",
    "PrecisionEstimate",
    "SolverOptions",
    "SupportPattern",
    "clime",
    "default_rho",
    "estimate_columns",
    "perturb",
    "recovery_metrics",
    "refit",
    "refitted_clime",
    "sample_covariance",
    "sign_pattern",
    "simplex_oracle",
    "solve_column",
    "standardize_columns",
    "symmetrize",
    "threshold",
]
