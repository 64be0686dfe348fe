"""Two-class linear discriminant analysis driven by a CLIME precision matrix.

The pipeline per repetition: stratified train/test split, Welch t-test
screening of features on the training rows, standardization with training
moments, K-fold cross-validation of lambda by mean validation likelihood
loss, CLIME on the full training set, then LDA on the test rows.

Class 1 is the positive class throughout.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .core import choose_rho, clime
from .covariance import column_moments, standardize_columns
from .exceptions import DimensionMismatch, InsufficientClassSize, TooFewSamples
from .linalg import check_symmetric
from .lp_solver import SolverOptions
from .model_select import NONZERO_TOL
from .simulation import argmin_first, cv_path, lambda_grid, rng_for

CLASSES = (1, 2)


@dataclass(frozen=True)
class LabeledDataset:
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] == 0:
            raise DimensionMismatch(f"features must be 2-D with at least one column, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("features contain non-finite values")
        y = np.asarray(self.labels).astype(int).reshape(-1)
        if y.shape[0] != x.shape[0]:
            raise DimensionMismatch(f"{y.shape[0]} labels for {x.shape[0]} rows")
        bad = set(np.unique(y)) - set(CLASSES)
        if bad:
            raise ValueError(f"labels must be 1 or 2, found {sorted(bad)}")
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def p(self):
        return self.features.shape[1]

    def class_counts(self):
        return tuple(int(np.sum(self.labels == k)) for k in CLASSES)

    def subset(self, rows=None, cols=None):
        x = self.features
        if rows is not None:
            x = x[rows]
        if cols is not None:
            x = x[:, cols]
        y = self.labels if rows is None else self.labels[rows]
        return LabeledDataset(x, y)


def stratified_split(data, test_counts, seed):
    """Draw ``test_counts[k]`` rows of class ``k + 1`` without replacement
    for the test set; everything else is training. Row order is kept."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    counts = data.class_counts()
    test_rows = []
    for k, want, have in zip(CLASSES, test_counts, counts):
        if want < 0 or want > have:
            raise InsufficientClassSize(f"class {k} has {have} rows, cannot hold out {want}")
        rows = np.flatnonzero(data.labels == k)
        test_rows.append(rng.choice(rows, size=want, replace=False))
    test_idx = np.sort(np.concatenate(test_rows)).astype(int)
    train_mask = np.ones(data.n, dtype=bool)
    train_mask[test_idx] = False
    return data.subset(rows=np.flatnonzero(train_mask)), data.subset(rows=test_idx)


def t_statistics(data):
    """Welch two-sample t statistic (class 1 minus class 2) per feature.

    A feature constant within both groups gets statistic 0.
    """
    x1 = data.features[data.labels == 1]
    x2 = data.features[data.labels == 2]
    if len(x1) < 2 or len(x2) < 2:
        raise TooFewSamples("each class needs at least 2 rows for a t test")
    se2 = x1.var(axis=0, ddof=1) / len(x1) + x2.var(axis=0, ddof=1) / len(x2)
    diff = x1.mean(axis=0) - x2.mean(axis=0)
    out = np.zeros(data.p)
    ok = se2 > 0
    out[ok] = diff[ok] / np.sqrt(se2[ok])
    return out


def select_top_features(t_stats, k):
    """Indices (ascending) of the ``k`` largest ``|t|``; lower index wins ties."""
    t_stats = np.asarray(t_stats, dtype=np.float64)
    if not 0 <= k <= t_stats.size:
        raise ValueError(f"cannot select {k} of {t_stats.size} features")
    order = np.argsort(-np.abs(t_stats), kind="stable")
    return np.sort(order[:k])


@dataclass(frozen=True)
class LdaModel:
    omega_hat: np.ndarray
    means: np.ndarray  # (2, p): row k is the class-(k+1) mean
    priors: np.ndarray  # (2,)


def fit_lda(train, omega_hat):
    omega_hat = check_symmetric(omega_hat, "omega_hat")
    if omega_hat.shape[0] != train.p:
        raise DimensionMismatch(f"omega_hat is {omega_hat.shape}, data has {train.p} features")
    counts = np.array(train.class_counts(), dtype=np.float64)
    if np.any(counts == 0):
        raise InsufficientClassSize("both classes must appear in the training data")
    means = np.vstack([train.features[train.labels == k].mean(axis=0) for k in CLASSES])
    return LdaModel(omega_hat, means, counts / counts.sum())


def discriminant_scores(model, x):
    """``x' O mu_k - mu_k' O mu_k / 2 + log pi_k`` for each row and class."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != model.means.shape[1]:
        raise DimensionMismatch(f"expected {model.means.shape[1]} features, got {x.shape[1]}")
    om = model.means @ model.omega_hat
    const = -0.5 * np.sum(om * model.means, axis=1) + np.log(model.priors)
    return x @ om.T + const


def predict(model, x):
    """Class id per row of ``x`` (1-d input gives a scalar); ties go to class 1."""
    scores = discriminant_scores(model, x)
    labels = np.where(scores[:, 0] >= scores[:, 1], 1, 2)
    return int(labels[0]) if np.ndim(x) == 1 else labels


@dataclass(frozen=True)
class ClassificationMetrics:
    specificity: float
    sensitivity: float
    mcc: float
    tp: int
    tn: int
    fp: int
    fn: int


def classification_metrics(predicted, actual):
    """Specificity, sensitivity and Matthews correlation; class 1 positive.

    A ratio with a zero denominator is NaN, except MCC which is reported as 0.
    """
    predicted = np.asarray(predicted).reshape(-1)
    actual = np.asarray(actual).reshape(-1)
    if predicted.shape != actual.shape:
        raise DimensionMismatch("predicted and actual differ in length")
    pos_p, pos_a = predicted == 1, actual == 1
    tp = int(np.sum(pos_p & pos_a))
    tn = int(np.sum(~pos_p & ~pos_a))
    fp = int(np.sum(pos_p & ~pos_a))
    fn = int(np.sum(~pos_p & pos_a))
    spec = tn / (tn + fp) if tn + fp else math.nan
    sens = tp / (tp + fn) if tp + fn else math.nan
    denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    mcc = (tp * tn - fp * fn) / math.sqrt(denom) if denom else 0.0
    return ClassificationMetrics(spec, sens, mcc, tp, tn, fp, fn)


def pooled_covariance(data):
    """Within-class covariance: rows centered by their class mean, divisor n."""
    centered = data.features.copy()
    for k in CLASSES:
        rows = data.labels == k
        if rows.any():
            centered[rows] -= centered[rows].mean(axis=0)
    cov = centered.T @ centered / data.n
    return np.triu(cov) + np.triu(cov, 1).T


def stratified_folds(labels, k, rng):
    """Fold id per row: each class is permuted and cut into ``k`` blocks."""
    folds = np.empty(len(labels), dtype=int)
    for c in CLASSES:
        rows = rng.permutation(np.flatnonzero(labels == c))
        for f, block in enumerate(np.array_split(rows, k)):
            folds[block] = f
    return folds


@dataclass(frozen=True)
class PipelineConfig:
    test_counts: tuple = (5, 16)
    n_features: int = 113
    cv_folds: int = 6
    reps: int = 100
    grid_size: int = 50
    grid_lo: float = 0.01
    grid_hi: float = 4.0
    seed: int = 0
    zero_tol: float = NONZERO_TOL
    solver: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        if len(self.test_counts) != 2 or min(self.test_counts) < 0:
            raise ValueError("test_counts must be two nonnegative integers")
        if self.n_features < 1 or self.cv_folds < 2 or self.reps < 1 or self.grid_size < 2:
            raise ValueError("n_features, reps >= 1; cv_folds, grid_size >= 2")


@dataclass
class PipelineRep:
    index: int
    lam: float
    rho: float
    metrics: ClassificationMetrics
    nonzero: int
    features: np.ndarray = field(repr=False)


@dataclass
class PipelineReport:
    config: PipelineConfig
    reps: list

    def column(self, name):
        if name == "nonzero":
            return np.array([r.nonzero for r in self.reps], dtype=np.float64)
        return np.array([getattr(r.metrics, name) for r in self.reps], dtype=np.float64)

    def summary(self):
        out = {}
        for name in ("specificity", "sensitivity", "mcc", "nonzero"):
            vals = self.column(name)
            vals = vals[np.isfinite(vals)]
            if vals.size == 0:
                out[name] = (None, None)
                continue
            se = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else None
            out[name] = (float(vals.mean()), se)
        return out


def select_lambda_kfold(train, grid, folds, opts=None):
    """Mean validation likelihood loss over folds; returns (lambda index, scores)."""
    total = np.zeros(len(grid))
    for f in np.unique(folds):
        fit = train.subset(rows=np.flatnonzero(folds != f))
        val = train.subset(rows=np.flatnonzero(folds == f))
        sigma_fit = pooled_covariance(fit)
        rho = choose_rho(sigma_fit, fit.n)
        _, scores = cv_path(sigma_fit, [pooled_covariance(val)], grid, rho=rho, opts=opts)
        total += scores[:, 0]
    total /= len(np.unique(folds))
    return argmin_first(total), total


def run_pipeline_rep(dataset, config, r, workers=1):
    rng = rng_for(config.seed, r)
    train, test = stratified_split(dataset, config.test_counts, rng)
    if min(train.class_counts()) < 2:
        raise InsufficientClassSize("training split leaves fewer than 2 rows in a class")
    feats = select_top_features(t_statistics(train), config.n_features)
    train, test = train.subset(cols=feats), test.subset(cols=feats)
    means, sds = column_moments(train.features)
    train = LabeledDataset(standardize_columns(train.features, means, sds), train.labels)
    test = LabeledDataset(standardize_columns(test.features, means, sds), test.labels)

    grid = lambda_grid(config.grid_size, train.n, max(train.p, 2), config.grid_lo, config.grid_hi)
    folds = stratified_folds(train.labels, config.cv_folds, rng)
    best, _ = select_lambda_kfold(train, grid, folds, opts=config.solver)

    sigma = pooled_covariance(train)
    rho = choose_rho(sigma, train.n)
    est = clime(sigma, grid[best], rho=rho, opts=config.solver, workers=workers)
    model = fit_lda(train, est.omega)
    metrics = classification_metrics(predict(model, test.features), test.labels)
    nonzero = int(np.sum(np.abs(est.omega) > config.zero_tol))
    return PipelineRep(r, float(grid[best]), float(rho), metrics, nonzero, feats)


def pcr_pipeline(dataset, config=None, progress=None, workers=1):
    """Repeat the split / screen / tune / classify protocol ``config.reps`` times."""
    config = config or PipelineConfig()
    if config.n_features > dataset.p:
        raise ValueError(f"n_features={config.n_features} exceeds the {dataset.p} available features")
    counts = dataset.class_counts()
    for k, want, have in zip(CLASSES, config.test_counts, counts):
        if want > have:
            raise InsufficientClassSize(f"class {k} has {have} rows, cannot hold out {want}")
    reps = []
    for r in range(config.reps):
        reps.append(run_pipeline_rep(dataset, config, r, workers))
        if progress:
            progress(r + 1)
    return PipelineReport(config, reps)
