"""Refitted CLIME: log-determinant minimization restricted to a support.

Given a sample covariance ``S`` and an allowed support, find the symmetric
positive definite ``Omega`` that is zero off the support and minimizes
``trace(S Omega) - log det Omega``. The stationarity condition is
``(S - Omega^-1)_ij = 0`` on the support.

The free parameters are the diagonal and the upper-triangle entries of the
support. Each step takes a Newton direction on those parameters (dense
Hessian ``2 c_a c_b (W_il W_jk + W_ik W_jl)`` with ``W = Omega^-1``, or
conjugate gradients on Hessian-vector products ``W D W`` when the support is
large), then backtracks until the iterate is positive definite and the
objective decreases enough. If that stalls, a sweep of single-entry Newton
updates is tried before giving up.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .core import clime
from .exceptions import DimensionMismatch, NonConvergence, NotPositiveDefinite, NotPositiveDefinitePath
from .linalg import check_symmetric, cholesky
from .model_select import SupportPattern, sign_pattern, threshold

DENSE_HESSIAN_LIMIT = 1500


@dataclass(frozen=True)
class RefitOptions:
    grad_tol: float = 1e-6
    rel_obj_tol: float = 1e-10
    max_iter: int = 500
    armijo: float = 1e-4
    shrink: float = 0.5


@dataclass
class RefitResult:
    omega: np.ndarray
    iterations: int
    grad_residual: float
    objective_history: list = field(repr=False)


def _objective(sigma, omega):
    """Return (objective, inverse) or (inf, None) when not PD."""
    try:
        fac = cholesky(omega)
    except NotPositiveDefinite:
        return np.inf, None
    inv = fac.solve(np.eye(omega.shape[0]))
    inv = (inv + inv.T) / 2
    return float(np.sum(sigma * omega)) - fac.log_det(), inv


class _Params:
    """Map between free-parameter vectors and symmetric matrices."""

    def __init__(self, support):
        p = support.shape[0]
        rows, cols = np.nonzero(np.triu(support))
        self.p = p
        self.rows = rows
        self.cols = cols
        self.scale = np.where(rows == cols, 0.5, 1.0)

    def __len__(self):
        return self.rows.size

    def to_matrix(self, vec):
        out = np.zeros((self.p, self.p))
        out[self.rows, self.cols] = vec
        out[self.cols, self.rows] = vec
        return out

    def gradient(self, grad_matrix):
        return 2.0 * self.scale * grad_matrix[self.rows, self.cols]

    def hessian(self, w):
        # entry (a, b) with a = (i, j), b = (k, l)
        i, j = self.rows, self.cols
        h = w[np.ix_(i, j)] * w[np.ix_(j, i)] + w[np.ix_(i, i)] * w[np.ix_(j, j)]
        return 2.0 * np.outer(self.scale, self.scale) * h

    def hess_vec(self, w, vec):
        d = self.to_matrix(vec)
        return self.gradient(w @ d @ w)


def _newton_direction(params, w, g):
    if len(params) <= DENSE_HESSIAN_LIMIT:
        h = params.hessian(w)
        try:
            return scipy.linalg.solve(h, -g, assume_a="pos", check_finite=False)
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
            return -g
    # inexact Newton by conjugate gradients
    gnorm = np.linalg.norm(g)
    tol = min(0.5, np.sqrt(gnorm)) * gnorm
    x = np.zeros_like(g)
    r = -g.copy()
    d = r.copy()
    rr = r @ r
    for _ in range(len(params)):
        hd = params.hess_vec(w, d)
        curv = d @ hd
        if curv <= 0:
            break
        a = rr / curv
        x += a * d
        r -= a * hd
        rr_new = r @ r
        if np.sqrt(rr_new) <= tol:
            break
        d = r + (rr_new / rr) * d
        rr = rr_new
    return x if np.any(x) else -g


def _line_search(sigma, omega, f, g, direction, params, opts):
    slope = g @ direction
    if slope >= 0:
        return None
    step = 1.0
    dmat = params.to_matrix(direction)
    for _ in range(60):
        cand = omega + step * dmat
        f_new, inv = _objective(sigma, cand)
        if f_new <= f + opts.armijo * step * slope:
            return cand, f_new, inv
        step *= opts.shrink
    return None


def _coordinate_sweep(sigma, omega, f, inv, params, opts):
    """One pass of single-entry Newton steps; returns the updated state."""
    for a in range(len(params)):
        i, j = params.rows[a], params.cols[a]
        grad = sigma - inv
        g = 2.0 * params.scale[a] * grad[i, j]
        h = 2.0 * params.scale[a] ** 2 * (inv[i, j] * inv[j, i] + inv[i, i] * inv[j, j])
        if h <= 0 or g == 0:
            continue
        delta = -g / h
        step = 1.0
        for _ in range(60):
            cand = omega.copy()
            cand[i, j] += step * delta
            if i != j:
                cand[j, i] += step * delta
            f_new, inv_new = _objective(sigma, cand)
            if f_new <= f + opts.armijo * step * g * delta:
                omega, f, inv = cand, f_new, inv_new
                break
            step *= opts.shrink
    return omega, f, inv


def refit_path(sigma_n, support, opts=None):
    """Support-constrained log-det minimization with iteration history.

    Parameters
    ----------
    sigma_n : (p, p) array
        Symmetric matrix with positive diagonal.
    support : SupportPattern or boolean (p, p) array
        Allowed nonzero positions. Symmetrized (union) and the diagonal is
        always added.
    """
    opts = opts or RefitOptions()
    sigma = check_symmetric(sigma_n, "sigma_n")
    p = sigma.shape[0]
    mask = support.support if isinstance(support, SupportPattern) else np.asarray(support, dtype=bool)
    if mask.shape != (p, p):
        raise DimensionMismatch(f"support shape {mask.shape} does not match sigma {sigma.shape}")
    mask = mask | mask.T | np.eye(p, dtype=bool)
    diag = np.diag(sigma)
    if np.any(diag <= 0):
        raise NotPositiveDefinitePath("sigma_n needs a positive diagonal for the diagonal start")

    params = _Params(mask)
    omega = np.diag(1.0 / diag)
    f, inv = _objective(sigma, omega)
    history = [f]
    for it in range(1, opts.max_iter + 1):
        grad = sigma - inv
        g = params.gradient(grad)
        res = float(np.max(np.abs(grad[mask])))
        if res <= opts.grad_tol and len(history) > 1:
            change = abs(history[-2] - history[-1]) / max(1.0, abs(history[-1]))
            if change <= opts.rel_obj_tol:
                return RefitResult(omega, it - 1, res, history)
        direction = _newton_direction(params, inv, g)
        found = _line_search(sigma, omega, f, g, direction, params, opts)
        if found is None:
            found = _line_search(sigma, omega, f, g, -g, params, opts)
        if found is None:
            omega_new, f_new, inv_new = _coordinate_sweep(sigma, omega, f, inv, params, opts)
            if f_new >= f:
                if res <= opts.grad_tol:
                    return RefitResult(omega, it - 1, res, history)
                raise NotPositiveDefinitePath(
                    f"no descent step keeps the iterate positive definite (gradient residual {res:.3g})"
                )
            found = (omega_new, f_new, inv_new)
        omega, f, inv = found
        omega = (omega + omega.T) / 2
        omega[~mask] = 0.0
        history.append(f)
    grad = sigma - inv
    res = float(np.max(np.abs(grad[mask])))
    if res <= opts.grad_tol:
        return RefitResult(omega, opts.max_iter, res, history)
    raise NonConvergence(f"refit did not converge in {opts.max_iter} iterations", estimate=omega)


def refit(sigma_n, support, opts=None):
    """Refitted estimate on ``support`` (see :func:`refit_path`)."""
    return refit_path(sigma_n, support, opts).omega


def refitted_clime(sigma_n, lam, rho=0.0, tau=0.0, opts=None, refit_opts=None, zero_tol=0.0):
    """CLIME, then hard thresholding at ``tau``, then refit on the survivors.

    Entries of the thresholded estimate with magnitude ``<= zero_tol`` are
    left out of the support.
    """
    est = clime(sigma_n, lam, rho=rho, opts=opts, strict=True)
    support = sign_pattern(threshold(est.omega, tau), zero_tol).with_diagonal()
    return refit(sigma_n, support, refit_opts)
