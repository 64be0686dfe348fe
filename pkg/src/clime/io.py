"""CSV / JSON readers and writers and plain-text report formatting."""

import csv
import io
import json
import math

import numpy as np

from .classify import LabeledDataset
from .simulation import LOSS_NAMES, RNG_NAME


class MalformedInput(ValueError):
    pass


def _parse_float(cell, row, col):
    try:
        value = float(cell)
    except ValueError:
        raise MalformedInput(f"row {row}, column {col}: non-numeric cell {cell!r}") from None
    if not math.isfinite(value):
        raise MalformedInput(f"row {row}, column {col}: non-finite value {cell!r}")
    return value


def _is_numeric_row(cells):
    try:
        for c in cells:
            float(c)
    except ValueError:
        return False
    return True


def _rows(path):
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise MalformedInput(f"{path}: no data")
    return [[c.strip() for c in r] for r in rows]


def read_matrix_csv(path):
    """Numeric CSV to a 2-D array; a non-numeric first row is a header."""
    rows = _rows(path)
    start = 0 if _is_numeric_row(rows[0]) else 1
    body = rows[start:]
    if not body:
        raise MalformedInput(f"{path}: header only")
    width = len(body[0])
    out = np.empty((len(body), width))
    for i, r in enumerate(body):
        line = i + start + 1
        if len(r) != width:
            raise MalformedInput(f"{path}: row {line} has {len(r)} cells, expected {width}")
        for j, cell in enumerate(r):
            out[i, j] = _parse_float(cell, line, j + 1)
    return out


def format_float(x):
    return "%.17g" % x


def write_matrix_csv(path, m, header=None):
    m = np.atleast_2d(np.asarray(m, dtype=np.float64))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header is not None:
            w.writerow(header)
        for row in m:
            w.writerow([format_float(v) for v in row])


def read_labeled_csv(path, positive_label=None):
    """Header row, then label in the first column and features after it.

    Labels ``1``/``2`` are used as given. Any other pair of labels needs
    ``positive_label`` to say which one is class 1.
    """
    rows = _rows(path)
    header, body = rows[0], rows[1:]
    if _is_numeric_row(header):
        raise MalformedInput(f"{path}: a header row is required")
    if not body:
        raise MalformedInput(f"{path}: no data rows")
    width = len(header)
    if width < 2:
        raise MalformedInput(f"{path}: need a label column and at least one feature")
    raw_labels = []
    x = np.empty((len(body), width - 1))
    for i, r in enumerate(body):
        if len(r) != width:
            raise MalformedInput(f"{path}: row {i + 2} has {len(r)} cells, expected {width}")
        raw_labels.append(r[0])
        for j, cell in enumerate(r[1:]):
            x[i, j] = _parse_float(cell, i + 2, j + 2)
    distinct = sorted(set(raw_labels))
    if len(distinct) != 2:
        raise MalformedInput(f"{path}: expected exactly two labels, found {distinct}")
    if positive_label is None:
        try:
            numeric = {float(v) for v in distinct}
        except ValueError:
            numeric = None
        if numeric != {1.0, 2.0}:
            raise MalformedInput(f"{path}: labels {distinct} are not 1/2; name the positive class")
        labels = np.array([int(float(v)) for v in raw_labels])
    else:
        if positive_label not in distinct:
            raise MalformedInput(f"{path}: positive label {positive_label!r} not among {distinct}")
        labels = np.array([1 if v == positive_label else 2 for v in raw_labels])
    return LabeledDataset(x, labels)


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


# ---------------------------------------------------------------------------
# reports


def _fmt_mean_se(pair, digits=3):
    mean, se = pair
    if mean is None:
        return "N/A"
    if se is None:
        return f"{mean:.{digits}f}"
    return f"{mean:.{digits}f}({se:.{digits}f})"


def _table(headers, rows):
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(headers)]
    lines = ["  ".join(h.rjust(w) for h, w in zip(headers, widths))]
    lines += ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in rows]
    return "\n".join(lines) + "\n"


def format_eval_report(report):
    cfg = report.config
    s = report.summary()
    lines = [
        f"# model {int(cfg.model.kind)}  p={cfg.model.p}  n_train={cfg.n_train}  n_valid={cfg.n_valid}  "
        f"reps={cfg.reps}  grid={cfg.lambda_grid_size}  seed={cfg.master_seed}",
        f"# rng: {RNG_NAME}",
    ]
    names = list(LOSS_NAMES) + ["tn_pct", "tp_pct", "nonzero"]
    labels = ["operator", "matrix_l1", "frobenius", "TN%", "TP%", "nonzero"]
    digits = [3, 3, 3, 2, 2, 1]
    rows = [[lab, _fmt_mean_se(s[n], d)] for lab, n, d in zip(labels, names, digits)]
    header = "mean(SE)" if cfg.reps > 1 else "mean"
    return "\n".join(lines) + "\n" + _table(["metric", header], rows)


def eval_report_csv(report):
    """Per-replication rows. Undefined rates are written as ``NA``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rep", "lambda", "rho", *LOSS_NAMES, "tn_pct", "tp_pct", "nonzero", "all_optimal"])
    for r in report.reps:
        tn = "NA" if r.recovery.tn_rate is None else format_float(100 * r.recovery.tn_rate)
        tp = "NA" if r.recovery.tp_rate is None else format_float(100 * r.recovery.tp_rate)
        w.writerow(
            [r.index, format_float(r.lam), format_float(r.rho)]
            + [format_float(r.losses[k]) for k in LOSS_NAMES]
            + [tn, tp, r.nonzero, int(r.all_optimal)]
        )
    return buf.getvalue()


def roc_csv(table):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["lambda", "mean_tpr", "mean_fpr"])
    for lam, tpr, fpr in table.rows():
        w.writerow([format_float(lam), "NA" if math.isnan(tpr) else format_float(tpr), "NA" if math.isnan(fpr) else format_float(fpr)])
    return buf.getvalue()


def format_pipeline_report(report):
    s = report.summary()
    cfg = report.config
    head = (
        f"# test_counts={cfg.test_counts[0]},{cfg.test_counts[1]}  features={cfg.n_features}  "
        f"folds={cfg.cv_folds}  reps={cfg.reps}  seed={cfg.seed}\n"
    )
    cells = [
        _fmt_mean_se(s["specificity"]),
        _fmt_mean_se(s["sensitivity"]),
        _fmt_mean_se(s["mcc"]),
        _fmt_mean_se(s["nonzero"], 1),
    ]
    return head + _table(["specificity", "sensitivity", "MCC", "nonzero_entries"], [cells])


def pipeline_report_csv(report):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rep", "lambda", "rho", "specificity", "sensitivity", "mcc", "nonzero"])
    for r in report.reps:
        m = r.metrics
        w.writerow([r.index, format_float(r.lam), format_float(r.rho), format_float(m.specificity),
                    format_float(m.sensitivity), format_float(m.mcc), r.nonzero])
    return buf.getvalue()
