"""Simulation models, cross-validated tuning and replicated experiments.

All randomness derives from ``numpy.random.SeedSequence`` entropy tuples:
replication ``r`` of an experiment with master seed ``s`` draws from
``SeedSequence([s, r])`` through the PCG64 generator, so results are
independent of execution order and of the number of worker processes.
"""

import enum
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import PrecisionEstimate, choose_rho, clime
from .covariance import sample_covariance
from .exceptions import AllInfeasible, DegenerateDraw, NotPositiveDefinite, NotSymmetric
from .linalg import check_symmetric, cholesky, frobenius_norm, matrix_l1_norm, spectral_norm
from .lp_solver import SolverOptions
from .model_select import NONZERO_TOL, RecoveryMetrics, recovery_metrics, sign_pattern

RNG_NAME = "numpy PCG64 seeded by SeedSequence([master_seed, replication])"


def rng_for(*entropy):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(list(entropy))))


# ---------------------------------------------------------------------------
# models


def model1_precision(p):
    """``omega_ij = 0.6 ** |i - j|``."""
    if p < 1:
        raise ValueError("p must be positive")
    idx = np.arange(p)
    return 0.6 ** np.abs(idx[:, None] - idx[None, :])


def model2_precision(p, seed=0, max_attempts=100):
    """Random sparse precision matrix with condition number ``p``.

    Off-diagonal entries of ``B`` are 0.5 with probability 0.1 (else 0);
    ``delta`` solves ``(l_max + delta) / (l_min + delta) = p`` for the
    extreme eigenvalues of ``B``; ``B + delta I`` is rescaled to unit
    diagonal. An all-zero ``B`` is redrawn from the next substream.
    """
    if p < 2:
        raise ValueError("p must be at least 2")
    for attempt in range(max_attempts):
        rng = rng_for(seed, attempt)
        upper = np.triu(rng.random((p, p)) < 0.1, 1) * 0.5
        b = upper + upper.T
        if np.any(b):
            break
    else:
        raise DegenerateDraw(f"B was all zero in {max_attempts} draws")
    eig = np.linalg.eigvalsh(b)
    delta = (eig[-1] - p * eig[0]) / (p - 1)
    omega = b + delta * np.eye(p)
    d = 1.0 / np.sqrt(np.diag(omega))
    out = omega * d[:, None] * d[None, :]
    out[np.diag_indices(p)] = 1.0
    return out


def model3_precision(p):
    """Unit diagonal, all off-diagonal entries 0.5."""
    if p < 2:
        raise ValueError("p must be at least 2")
    return 0.5 * np.eye(p) + 0.5 * np.ones((p, p))


class ModelKind(enum.IntEnum):
    MODEL1 = 1
    MODEL2 = 2
    MODEL3 = 3


@dataclass(frozen=True)
class ModelSpec:
    kind: ModelKind
    p: int
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind(self.kind))
        if self.p < 2:
            raise ValueError("p must be at least 2")

    def precision(self):
        if self.kind is ModelKind.MODEL1:
            return model1_precision(self.p)
        if self.kind is ModelKind.MODEL2:
            return model2_precision(self.p, self.seed)
        return model3_precision(self.p)


def mvn_sample(omega0, n, seed):
    """``n`` draws from N(0, omega0^-1), as rows.

    ``seed`` may be an int, a SeedSequence or a Generator. Draws are
    ``z @ L.T`` with ``L`` the Cholesky factor of the covariance.
    """
    omega0 = check_symmetric(omega0, "omega0")
    cov_factor = cholesky(omega0)
    sigma0 = cov_factor.solve(np.eye(omega0.shape[0]))
    sigma0 = (sigma0 + sigma0.T) / 2
    lower = cholesky(sigma0).lower
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    z = rng.standard_normal((n, omega0.shape[0]))
    return z @ lower.T


# ---------------------------------------------------------------------------
# tuning


def likelihood_loss(sigma, omega):
    """``trace(sigma @ omega) - log det(omega)``; omega must be PD."""
    fac = cholesky(omega)
    return float(np.sum(sigma * omega.T)) - fac.log_det()


def lambda_grid(size, n, p, lo=0.01, hi=4.0):
    """Ascending log-spaced grid on ``[lo, hi] * sqrt(log p / n)``."""
    if size < 2:
        raise ValueError("grid size must be at least 2")
    if not 0 < lo < hi:
        raise ValueError("need 0 < lo < hi")
    r = math.sqrt(math.log(p) / n)
    return np.geomspace(lo * r, hi * r, size)


def _score(sigma_valid, est):
    if not np.all(np.isfinite(est.omega)):
        return np.inf
    try:
        return likelihood_loss(sigma_valid, est.omega)
    except (NotPositiveDefinite, NotSymmetric):
        return np.inf


def cv_path(sigma_train, sigma_valids, grid, rho=0.0, opts=None):
    """Fit every grid value on ``sigma_train``; score against each
    validation covariance. Returns (estimates, scores[len(grid), folds])."""
    ests = []
    scores = np.empty((len(grid), len(sigma_valids)))
    for g, lam in enumerate(grid):
        est = clime(sigma_train, lam, rho=rho, opts=opts)
        ests.append(est)
        scores[g] = [_score(sv, est) for sv in sigma_valids]
    return ests, scores


def argmin_first(scores):
    """Index of the smallest finite score, first occurrence on ties."""
    scores = np.asarray(scores, dtype=np.float64)
    if not np.any(np.isfinite(scores)):
        raise AllInfeasible("every grid point produced a non positive definite estimate")
    return int(np.argmin(np.where(np.isfinite(scores), scores, np.inf)))


def cv_select(train, valid, grid, rho=None, opts=None):
    """Pick lambda by likelihood loss on a validation sample.

    ``rho=None`` applies :func:`choose_rho` to the training covariance.
    Returns ``(lambda, PrecisionEstimate, scores)``.
    """
    grid = np.asarray(grid, dtype=np.float64).reshape(-1)
    if grid.size == 0:
        raise ValueError("grid is empty")
    sigma_train = sample_covariance(train)
    sigma_valid = sample_covariance(valid)
    if rho is None:
        rho = choose_rho(sigma_train, train.shape[0])
    ests, scores = cv_path(sigma_train, [sigma_valid], grid, rho=rho, opts=opts)
    best = argmin_first(scores[:, 0])
    return float(grid[best]), ests[best], scores[:, 0]


# ---------------------------------------------------------------------------
# experiments

LOSS_NAMES = ("operator", "matrix_l1", "frobenius")


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelSpec
    n_train: int = 100
    n_valid: int = 100
    reps: int = 100
    lambda_grid_size: int = 50
    master_seed: int = 0
    grid_lo: float = 0.01
    grid_hi: float = 4.0
    zero_tol: float = NONZERO_TOL
    include_diagonal: bool = True
    rho: Optional[float] = None
    solver: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        for name in ("n_train", "n_valid", "reps", "lambda_grid_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.n_train < 2 or self.n_valid < 2:
            raise ValueError("n_train and n_valid must be at least 2")
        if self.lambda_grid_size < 2:
            raise ValueError("lambda_grid_size must be at least 2")

    def grid(self):
        return lambda_grid(self.lambda_grid_size, self.n_train, self.model.p, self.grid_lo, self.grid_hi)


@dataclass
class RepResult:
    index: int
    lam: float
    rho: float
    losses: dict
    recovery: RecoveryMetrics
    nonzero: int
    all_optimal: bool


def _mean_se(values):
    values = np.asarray([v for v in values if v is not None], dtype=np.float64)
    if values.size == 0:
        return None, None
    mean = float(values.mean())
    if values.size < 2:
        return mean, None
    return mean, float(values.std(ddof=1) / math.sqrt(values.size))


@dataclass
class EvalReport:
    """Per-replication results plus mean and standard error summaries."""

    config: ExperimentConfig
    reps: list

    @property
    def chosen_lambdas(self):
        return np.array([r.lam for r in self.reps])

    def losses(self, name):
        return np.array([r.losses[name] for r in self.reps])

    def summary(self):
        """Mapping metric -> (mean, se); se is None with one replication,
        and both are None when a rate is undefined in every replication
        (TN% for a model without true zeros)."""
        out = {name: _mean_se(self.losses(name)) for name in LOSS_NAMES}
        out["tn_pct"] = _mean_se([None if r.recovery.tn_rate is None else 100 * r.recovery.tn_rate for r in self.reps])
        out["tp_pct"] = _mean_se([None if r.recovery.tp_rate is None else 100 * r.recovery.tp_rate for r in self.reps])
        out["nonzero"] = _mean_se([r.nonzero for r in self.reps])
        return out


def _run_rep(config, omega0, grid, r):
    rng = rng_for(config.master_seed, r)
    train = mvn_sample(omega0, config.n_train, rng)
    valid = mvn_sample(omega0, config.n_valid, rng)
    sigma_train = sample_covariance(train)
    rho = config.rho if config.rho is not None else choose_rho(sigma_train, config.n_train)
    ests, scores = cv_path(sigma_train, [sample_covariance(valid)], grid, rho=rho, opts=config.solver)
    best = argmin_first(scores[:, 0])
    est = ests[best]
    diff = est.omega - omega0
    losses = {
        "operator": spectral_norm(diff),
        "matrix_l1": matrix_l1_norm(diff),
        "frobenius": frobenius_norm(diff),
    }
    pattern = sign_pattern(est.omega, config.zero_tol)
    rec = recovery_metrics(pattern, sign_pattern(omega0, config.zero_tol), include_diagonal=config.include_diagonal)
    return RepResult(r, float(grid[best]), float(rho), losses, rec, pattern.nonzero_count(), est.ok)


def _run_rep_star(args):
    return _run_rep(*args)


def run_experiment(config, workers=1, progress=None):
    """Replicate: sample, tune lambda on the validation sample, score.

    ``progress`` is called with the number of finished replications.
    """
    omega0 = config.model.precision()
    grid = config.grid()
    jobs = [(config, omega0, grid, r) for r in range(config.reps)]
    results = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for res in pool.map(_run_rep_star, jobs):
                results.append(res)
                if progress:
                    progress(len(results))
    else:
        for job in jobs:
            results.append(_run_rep_star(job))
            if progress:
                progress(len(results))
    results.sort(key=lambda res: res.index)
    return EvalReport(config, results)


@dataclass
class RocTable:
    lambdas: np.ndarray
    tpr: np.ndarray
    fpr: np.ndarray

    def rows(self):
        return list(zip(self.lambdas.tolist(), self.tpr.tolist(), self.fpr.tolist()))


def roc_sweep(model, n, grid, reps, master_seed=0, rho=None, opts=None, zero_tol=NONZERO_TOL, include_diagonal=True):
    """Average TPR / FPR per lambda over ``reps`` training samples."""
    omega0 = model.precision()
    truth = sign_pattern(omega0, zero_tol)
    grid = np.asarray(grid, dtype=np.float64)
    tpr = np.zeros((reps, grid.size))
    fpr = np.zeros((reps, grid.size))
    for r in range(reps):
        train = mvn_sample(omega0, n, rng_for(master_seed, r))
        sigma = sample_covariance(train)
        rho_r = rho if rho is not None else choose_rho(sigma, n)
        for g, lam in enumerate(grid):
            est = clime(sigma, lam, rho=rho_r, opts=opts)
            m = recovery_metrics(sign_pattern(est.omega, zero_tol), truth, include_diagonal)
            tpr[r, g] = np.nan if m.tpr is None else m.tpr
            fpr[r, g] = np.nan if m.fpr is None else m.fpr
    with warnings.catch_warnings():
        # an undefined rate in every rep (no true zeros, say) averages to NaN
        warnings.simplefilter("ignore", RuntimeWarning)
        return RocTable(grid, np.nanmean(tpr, axis=0), np.nanmean(fpr, axis=0))


__all__ = [
    "EvalReport",
    "ExperimentConfig",
    "ModelKind",
    "ModelSpec",
    "PrecisionEstimate",
    "RocTable",
    "cv_select",
    "lambda_grid",
    "likelihood_loss",
    "model1_precision",
    "model2_precision",
    "model3_precision",
    "mvn_sample",
    "roc_sweep",
    "run_experiment",
]
