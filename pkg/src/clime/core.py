"""The CLIME estimator: column LPs, symmetrization and the rho-perturbed form."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .covariance import default_rho, perturb
from .exceptions import SolverFailure
from .linalg import check_square, check_symmetric, elementwise_l1_norm, is_positive_definite
from .lp_solver import LpSolution, SolverOptions, solve_columns


@dataclass
class PrecisionEstimate:
    """Symmetrized estimate together with what produced it.

    ``raw`` is the column-wise solution before symmetrization.
    """

    omega: np.ndarray
    lam: float
    rho: float
    column_diagnostics: list = field(repr=False)
    raw: np.ndarray = field(repr=False)
    symmetric: bool = True

    @property
    def ok(self):
        return all(d.ok for d in self.column_diagnostics)

    @property
    def failed_columns(self):
        return [j for j, d in enumerate(self.column_diagnostics) if not d.ok]

    def diagnostics(self):
        return {
            "lambda": self.lam,
            "rho": self.rho,
            "all_optimal": self.ok,
            "columns": [d.summary() for d in self.column_diagnostics],
        }


# Columns are batched in fixed blocks so the worker count never changes
# which columns share a batched solve (and hence the rounding).
BLOCK = 32


def _blocks(n):
    return [np.arange(lo, min(lo + BLOCK, n)) for lo in range(0, n, BLOCK)]


def solve_all_columns(sigma, lam, opts=None, workers=1):
    """Column LP solutions for every target ``e_i``, in column order."""
    sigma = check_symmetric(sigma, "sigma")
    parts = _blocks(sigma.shape[0])
    if workers <= 1 or len(parts) < 2:
        results = [solve_columns(sigma, idx, lam, opts=opts) for idx in parts]
    else:
        with ThreadPoolExecutor(max_workers=min(workers, len(parts))) as pool:
            results = list(pool.map(lambda idx: solve_columns(sigma, idx, lam, opts=opts), parts))
    return [sol for part in results for sol in part]


def estimate_columns(sigma, lam, opts=None, workers=1, strict=True):
    """Stack the column solutions into the unsymmetrized estimate.

    With ``strict`` a non-optimal column raises :class:`SolverFailure`
    naming the (0-based) column; otherwise the solutions are returned
    alongside so the caller can inspect them.
    """
    sols = solve_all_columns(sigma, lam, opts=opts, workers=workers)
    if strict:
        for j, sol in enumerate(sols):
            if not sol.ok:
                raise SolverFailure(f"column {j}: {sol.status.value} {sol.message}".strip(), column=j, solution=sol)
    omega1 = np.column_stack([sol.beta for sol in sols])
    return omega1, sols


def symmetrize(omega1):
    """Keep, for each pair (i, j), the entry of smaller magnitude.

    Ties resolve to ``omega1[i, j]`` for the upper triangle (i < j), which
    is then mirrored.
    """
    omega1 = check_square(omega1, "omega1")
    upper = omega1
    lower = omega1.T
    take_upper = np.abs(upper) <= np.abs(lower)
    chosen = np.where(take_upper, upper, lower)
    out = np.triu(chosen)
    out = out + np.triu(out, 1).T
    return out


def choose_rho(sigma_n, n=None):
    """0 when ``sigma_n`` is numerically positive definite, otherwise
    ``sqrt(log p / n)`` (``n`` required in that case)."""
    if is_positive_definite(sigma_n):
        return 0.0
    p = sigma_n.shape[0]
    if n is None:
        raise ValueError("sigma is singular; pass n (or rho) to pick the perturbation")
    return default_rho(n, max(p, 2))


def clime(sigma_n, lam, rho=0.0, opts=None, workers=1, strict=False):
    """CLIME estimate from a sample covariance.

    Parameters
    ----------
    sigma_n : (p, p) array
        Sample covariance.
    lam : float
        Constraint bound on ``|(sigma_n + rho I) Omega - I|_inf``.
    rho : float
        Diagonal perturbation; 0 gives the unperturbed estimator.
    strict : bool
        Raise on the first non-optimal column instead of flagging it in the
        returned diagnostics.
    """
    if not lam >= 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    if not rho >= 0:
        raise ValueError(f"rho must be nonnegative, got {rho}")
    sigma = perturb(check_symmetric(sigma_n, "sigma_n"), rho)
    omega1, sols = estimate_columns(sigma, lam, opts=opts, workers=workers, strict=strict)
    if np.all(np.isfinite(omega1)):
        omega = symmetrize(omega1)
    else:
        omega = np.full_like(omega1, np.nan)
    return PrecisionEstimate(omega=omega, lam=float(lam), rho=float(rho), column_diagnostics=sols, raw=omega1)


def elementwise_l1_of_estimate(omega):
    return elementwise_l1_norm(omega)


__all__ = [
    "LpSolution",
    "PrecisionEstimate",
    "SolverOptions",
    "choose_rho",
    "clime",
    "elementwise_l1_of_estimate",
    "estimate_columns",
    "solve_all_columns",
    "symmetrize",
]
