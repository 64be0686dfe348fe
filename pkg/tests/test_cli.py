import json
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from clime.cli import build_parser, default_threads, main
from clime.io import read_matrix_csv, write_matrix_csv


@pytest.fixture
def files(tmp_path):
    rng = np.random.default_rng(0)
    np.savetxt(tmp_path / "eye.csv", np.eye(4), delimiter=",")
    np.savetxt(tmp_path / "wide.csv", rng.standard_normal((10, 15)), delimiter=",")
    np.savetxt(tmp_path / "train.csv", rng.standard_normal((40, 5)), delimiter=",")
    np.savetxt(tmp_path / "valid.csv", rng.standard_normal((40, 5)), delimiter=",")
    y = np.r_[np.ones(30), 2 * np.ones(30)]
    f = rng.standard_normal((60, 8))
    f[:30, :3] += 3
    header = "label," + ",".join(f"g{i}" for i in range(8))
    np.savetxt(tmp_path / "labeled.csv", np.column_stack([y, f]), delimiter=",", header=header, comments="")
    return tmp_path


def run(*args):
    return main([str(a) for a in args])


class TestEstimate:
    def test_identity_zero_lambda(self, files):
        out = files / "o.csv"
        assert run("estimate", "--cov", files / "eye.csv", "--lambda", 0, "--out", out) == 0
        assert_allclose(read_matrix_csv(out), np.eye(4), atol=1e-10)
        diag = json.loads((files / "o.csv.json").read_text())
        assert diag["all_optimal"] and diag["rho"] == 0.0

    def test_auto_rho_when_wide(self, files):
        out = files / "o.csv"
        assert run("estimate", "--data", files / "wide.csv", "--lambda", 0.3, "--out", out) == 0
        diag = json.loads((files / "o.csv.json").read_text())
        assert diag["rho"] == pytest.approx(math.sqrt(math.log(15) / 10))

    def test_threshold_and_refit_outputs(self, files):
        args = ["estimate", "--data", files / "train.csv", "--lambda", 0.1, "--out", files / "o.csv"]
        args += ["--threshold-out", files / "t.csv", "--refit-out", files / "r.csv", "--tau", 0.05]
        assert run(*args) == 0
        t = read_matrix_csv(files / "t.csv")
        r = read_matrix_csv(files / "r.csv")
        off = ~np.eye(5, dtype=bool)
        assert np.all((r[off] != 0) <= (t[off] != 0))

    def test_validation_choice(self, files):
        args = ["estimate", "--data", files / "train.csv", "--valid", files / "valid.csv", "--grid-size", 5]
        assert run(*args, "--out", files / "o.csv") == 0
        diag = json.loads((files / "o.csv.json").read_text())
        assert diag["lambda"] in diag["grid"]

    def test_malformed_input(self, files):
        bad = files / "bad.csv"
        bad.write_text("1,2\n3\n")
        assert run("estimate", "--cov", bad, "--lambda", 0.1, "--out", files / "o.csv") == 1

    def test_missing_lambda(self, files):
        assert run("estimate", "--cov", files / "eye.csv", "--out", files / "o.csv") == 1

    def test_solver_failure_writes_diagnostics(self, files):
        out = files / "o.csv"
        code = run("estimate", "--cov", files / "eye.csv", "--lambda", 0.1, "--max-iter", 1, "--out", out)
        assert code == 2
        diag = json.loads((files / "o.csv.json").read_text())
        assert diag["failed_columns"]
        assert not out.exists()

    def test_round_trip_precision(self, files):
        out = files / "o.csv"
        run("estimate", "--data", files / "train.csv", "--lambda", 0.05, "--out", out)
        m = read_matrix_csv(out)
        again = files / "again.csv"
        write_matrix_csv(again, m)
        assert again.read_bytes() == out.read_bytes()


class TestSimulate:
    def test_model3_na_and_determinism(self, files):
        outs = []
        for k in range(2):
            csv = files / f"s{k}.csv"
            rep = files / f"s{k}.txt"
            args = ["simulate", "--model", 3, "--p", 8, "--reps", 2, "--grid-size", 4, "--seed", 5]
            assert run(*args, "--csv", csv, "--report", rep, "--quiet", "--threads", 1 + k) == 0
            outs.append((csv.read_bytes(), rep.read_bytes()))
        assert outs[0] == outs[1]
        assert "N/A" in outs[0][1].decode()
        assert "NA" in outs[0][0].decode()

    def test_single_rep_no_se(self, files):
        rep = files / "r.txt"
        assert run("simulate", "--model", 1, "--p", 5, "--reps", 1, "--grid-size", 3, "--report", rep, "--quiet") == 0
        assert "SE" not in rep.read_text()

    def test_roc(self, files):
        roc = files / "roc.csv"
        args = ["simulate", "--model", 2, "--p", 6, "--reps", 1, "--grid-size", 4, "--roc", roc, "--quiet"]
        assert run(*args, "--report", files / "r.txt") == 0
        lines = roc.read_text().strip().splitlines()
        assert lines[0] == "lambda,mean_tpr,mean_fpr"
        assert len(lines) == 5

    def test_bad_model(self, files):
        assert run("simulate", "--model", 4) == 1

    def test_bad_grid(self, files):
        assert run("simulate", "--model", 1, "--grid-lo", 5, "--grid-hi", 1, "--quiet") == 1


class TestClassify:
    def test_runs(self, files):
        rep = files / "c.txt"
        args = ["classify", "--input", files / "labeled.csv", "--test-counts", "3,3", "--features", 5]
        assert run(*args, "--folds", 3, "--reps", 2, "--grid-size", 4, "--quiet", "--report", rep) == 0
        assert "MCC" in rep.read_text()

    def test_too_many_features(self, files, capsys):
        assert run("classify", "--input", files / "labeled.csv", "--features", 50) == 1
        assert "--features" in capsys.readouterr().err

    def test_malformed_labels(self, files):
        bad = files / "bad.csv"
        bad.write_text("y,a\n1,0\n3,1\n")
        assert run("classify", "--input", bad) == 1


def test_help_lists_defaults():
    parser = build_parser()
    sub = parser._subparsers._group_actions[0].choices
    for name in ("estimate", "simulate", "classify"):
        text = sub[name].format_help()
        assert "--threads" in text
        assert "default" in text


def test_threads_env(monkeypatch):
    monkeypatch.setenv("CLIME_THREADS", "3")
    assert default_threads() == 3
    monkeypatch.setenv("CLIME_THREADS", "bogus")
    assert default_threads() >= 1
