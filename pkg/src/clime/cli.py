"""Command-line entry point: ``clime estimate | simulate | classify``.

Exit codes: 0 success, 1 malformed input or bad configuration, 2 solver
failure (the diagnostics file is written first).
"""

import argparse
import os
import sys

import numpy as np

from . import __version__
from .classify import PipelineConfig, pcr_pipeline
from .core import clime
from .covariance import default_rho, sample_covariance
from .exceptions import ClimeError
from .io import (
    MalformedInput,
    eval_report_csv,
    format_eval_report,
    format_pipeline_report,
    pipeline_report_csv,
    read_labeled_csv,
    read_matrix_csv,
    roc_csv,
    write_json,
    write_matrix_csv,
)
from .linalg import elementwise_inf_norm, elementwise_l1_norm, is_positive_definite, matrix_l1_norm, spectral_norm
from .lp_solver import SolverOptions
from .model_select import NONZERO_TOL, default_tau, sign_pattern, threshold
from .refit import refit_path
from .simulation import ExperimentConfig, ModelSpec, cv_select, lambda_grid, roc_sweep, run_experiment


class UsageError(Exception):
    pass


def default_threads():
    env = os.environ.get("CLIME_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _nonneg_float(text):
    v = float(text)
    if not v >= 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative number, got {text}")
    return v


def _pair(text):
    try:
        a, b = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected two integers like 5,16, got {text!r}") from None
    if a < 0 or b < 0:
        raise argparse.ArgumentTypeError("counts must be nonnegative")
    return a, b


def _solver_args(p):
    p.add_argument("--gap-tol", type=float, default=SolverOptions.gap_tol, help="interior-point duality gap tolerance")
    p.add_argument("--max-iter", type=_positive_int, default=SolverOptions.max_iter, help="Newton steps per column")


def _solver(args):
    return SolverOptions(gap_tol=args.gap_tol, max_iter=args.max_iter)


def build_parser():
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="clime", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="estimate a precision matrix", formatter_class=fmt)
    src = est.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", help="n x p data CSV (rows are observations)")
    src.add_argument("--cov", help="p x p covariance CSV")
    est.add_argument("--lambda", dest="lam", type=_nonneg_float, default=None,
                     help="constraint bound; required unless --valid is given")
    est.add_argument("--valid", help="validation data CSV; picks lambda on a grid by likelihood loss (needs --data)")
    est.add_argument("--grid-size", type=_positive_int, default=50, help="lambda grid size for --valid")
    est.add_argument("--grid-lo", type=float, default=0.01, help="grid start, in units of sqrt(log p / n)")
    est.add_argument("--grid-hi", type=float, default=4.0, help="grid end, in units of sqrt(log p / n)")
    est.add_argument("--rho", type=_nonneg_float, default=None,
                     help="diagonal perturbation; default 0 if the covariance is positive definite, else sqrt(log p / n)")
    est.add_argument("--n", type=_positive_int, default=None, help="sample size behind --cov (for the default rho)")
    est.add_argument("--tau", type=_nonneg_float, default=None,
                     help="threshold level; default 4 * ||Omega_hat||_L1 * lambda")
    est.add_argument("--out", required=True, help="output CSV for the estimate")
    est.add_argument("--threshold-out", help="also write the thresholded estimate here")
    est.add_argument("--refit-out", help="also write the refitted estimate here")
    est.add_argument("--diagnostics", help="JSON diagnostics path (default: <out>.json)")
    est.add_argument("--threads", type=_positive_int, default=default_threads(), help="worker threads for column solves")
    _solver_args(est)

    sim = sub.add_parser("simulate", help="replicated simulation study", formatter_class=fmt)
    sim.add_argument("--model", type=int, choices=(1, 2, 3), required=True)
    sim.add_argument("--p", type=_positive_int, default=30)
    sim.add_argument("--n", type=_positive_int, default=100, help="training sample size")
    sim.add_argument("--n-valid", type=_positive_int, default=100, help="validation sample size")
    sim.add_argument("--reps", type=_positive_int, default=100)
    sim.add_argument("--seed", type=int, default=0, help="master seed")
    sim.add_argument("--model-seed", type=int, default=0, help="seed of the model 2 precision matrix")
    sim.add_argument("--grid-size", type=_positive_int, default=50)
    sim.add_argument("--grid-lo", type=float, default=0.01, help="grid start, in units of sqrt(log p / n)")
    sim.add_argument("--grid-hi", type=float, default=4.0, help="grid end, in units of sqrt(log p / n)")
    sim.add_argument("--csv", help="per-replication CSV output")
    sim.add_argument("--report", help="text report output (default: stdout)")
    sim.add_argument("--roc", help="also write a TPR/FPR sweep over the grid to this CSV")
    sim.add_argument("--threads", type=_positive_int, default=default_threads(), help="worker processes")
    sim.add_argument("--quiet", action="store_true", help="no per-replication counter on stderr")
    _solver_args(sim)

    cls = sub.add_parser("classify", help="LDA classification pipeline", formatter_class=fmt)
    cls.add_argument("--input", required=True, help="labeled CSV: header, label column first")
    cls.add_argument("--positive-label", help="label of class 1 when labels are not 1/2")
    cls.add_argument("--test-counts", type=_pair, default=(5, 16), help="held-out rows per class")
    cls.add_argument("--features", type=_positive_int, default=113, help="features kept after t-test screening")
    cls.add_argument("--folds", type=_positive_int, default=6, help="cross-validation folds")
    cls.add_argument("--reps", type=_positive_int, default=100)
    cls.add_argument("--seed", type=int, default=0)
    cls.add_argument("--grid-size", type=_positive_int, default=50)
    cls.add_argument("--csv", help="per-repetition CSV output")
    cls.add_argument("--report", help="text report output (default: stdout)")
    cls.add_argument("--threads", type=_positive_int, default=default_threads(), help="worker threads for column solves")
    cls.add_argument("--quiet", action="store_true", help="no per-repetition counter on stderr")
    _solver_args(cls)
    return parser


def _emit(text, path):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _counter(total, quiet):
    if quiet:
        return None

    def tick(done):
        sys.stderr.write(f"\r{done}/{total}")
        if done == total:
            sys.stderr.write("\n")
        sys.stderr.flush()

    return tick


def cmd_estimate(args):
    opts = _solver(args)
    diag_path = args.diagnostics or args.out + ".json"
    if args.data:
        x = read_matrix_csv(args.data)
        n = x.shape[0]
        sigma = sample_covariance(x)
    else:
        if args.valid:
            raise UsageError("--valid needs --data")
        sigma = read_matrix_csv(args.cov)
        n = args.n
        if sigma.shape[0] != sigma.shape[1]:
            raise MalformedInput(f"covariance must be square, got {sigma.shape}")
        if np.max(np.abs(sigma - sigma.T)) > 1e-10:
            raise MalformedInput("covariance is not symmetric")
    p = sigma.shape[0]

    rho = args.rho
    if rho is None:
        if is_positive_definite(sigma):
            rho = 0.0
        elif n is None:
            raise UsageError("covariance is singular: pass --rho or --n")
        else:
            rho = default_rho(n, max(p, 2))

    diagnostics = {"p": p, "n": n, "rho": rho}
    if args.valid:
        valid = read_matrix_csv(args.valid)
        if valid.shape[1] != p:
            raise MalformedInput(f"validation data has {valid.shape[1]} columns, expected {p}")
        grid = lambda_grid(args.grid_size, n, max(p, 2), args.grid_lo, args.grid_hi)
        lam, est, scores = cv_select(x, valid, grid, rho=rho, opts=opts)
        diagnostics["grid"] = grid.tolist()
        diagnostics["cv_scores"] = [s if np.isfinite(s) else None for s in scores]
    else:
        if args.lam is None:
            raise UsageError("--lambda is required without --valid")
        lam = args.lam
        est = clime(sigma, lam, rho=rho, opts=opts, workers=args.threads)
    diagnostics.update(est.diagnostics())
    diagnostics["lambda"] = lam

    if not est.ok:
        diagnostics["failed_columns"] = est.failed_columns
        write_json(diag_path, diagnostics)
        sys.stderr.write(f"solver failed on columns {est.failed_columns}; see {diag_path}\n")
        return 2

    omega = est.omega
    diagnostics["norms"] = {
        "elementwise_l1": elementwise_l1_norm(omega),
        "elementwise_inf": elementwise_inf_norm(omega),
        "matrix_l1": matrix_l1_norm(omega),
        "spectral": spectral_norm(omega),
    }
    diagnostics["nonzero_entries"] = int(np.sum(np.abs(omega) > NONZERO_TOL))
    write_matrix_csv(args.out, omega)

    if args.threshold_out or args.refit_out:
        m_bound = matrix_l1_norm(omega)
        tau = args.tau if args.tau is not None else default_tau(m_bound, lam) if m_bound > 0 else 0.0
        thresholded = threshold(omega, tau)
        diagnostics["tau"] = tau
        if args.threshold_out:
            write_matrix_csv(args.threshold_out, thresholded)
        if args.refit_out:
            support = sign_pattern(thresholded, 0.0).with_diagonal()
            try:
                result = refit_path(sigma, support)
            except ClimeError as exc:
                diagnostics["refit_error"] = str(exc)
                write_json(diag_path, diagnostics)
                sys.stderr.write(f"refit failed: {exc}\n")
                return 2
            diagnostics["refit"] = {"iterations": result.iterations, "grad_residual": result.grad_residual}
            write_matrix_csv(args.refit_out, result.omega)
    write_json(diag_path, diagnostics)
    return 0


def cmd_simulate(args):
    try:
        config = ExperimentConfig(
            model=ModelSpec(args.model, args.p, args.model_seed),
            n_train=args.n,
            n_valid=args.n_valid,
            reps=args.reps,
            lambda_grid_size=args.grid_size,
            master_seed=args.seed,
            grid_lo=args.grid_lo,
            grid_hi=args.grid_hi,
            solver=_solver(args),
        )
        config.grid()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    report = run_experiment(config, workers=args.threads, progress=_counter(args.reps, args.quiet))
    _emit(format_eval_report(report), args.report)
    if args.csv:
        _emit(eval_report_csv(report), args.csv)
    if args.roc:
        table = roc_sweep(config.model, config.n_train, config.grid(), config.reps, master_seed=config.master_seed, opts=config.solver)
        _emit(roc_csv(table), args.roc)
    return 0


def cmd_classify(args):
    data = read_labeled_csv(args.input, args.positive_label)
    if args.features > data.p:
        raise UsageError(f"--features {args.features} exceeds the {data.p} feature columns")
    try:
        config = PipelineConfig(
            test_counts=args.test_counts,
            n_features=args.features,
            cv_folds=args.folds,
            reps=args.reps,
            grid_size=args.grid_size,
            seed=args.seed,
            solver=_solver(args),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    report = pcr_pipeline(data, config, progress=_counter(args.reps, args.quiet), workers=args.threads)
    _emit(format_pipeline_report(report), args.report)
    if args.csv:
        _emit(pipeline_report_csv(report), args.csv)
    return 0


COMMANDS = {"estimate": cmd_estimate, "simulate": cmd_simulate, "classify": cmd_classify}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors; this CLI reserves 2 for solver failures
        return 0 if exc.code == 0 else 1
    try:
        return COMMANDS[args.command](args)
    except (UsageError, MalformedInput, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except ClimeError as exc:
        if isinstance(exc, ValueError):
            sys.stderr.write(f"error: {exc}\n")
            return 1
        sys.stderr.write(f"solver error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
