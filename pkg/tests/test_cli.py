import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from automodeling.cli import InputError, format_study_csv, main, parse_args, read_csv, symmetric_sample

FAST = ["--boot", "5", "--max-iters", "200", "--tol", "1e-5"]


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


class TestReadCsv:
    def test_two_columns(self, tmp_path):
        d = read_csv(write(tmp_path / "a.csv", "x,y\n1,2\n3,4\n"))
        assert d.n == 2 and d.k == 1
        np.testing.assert_array_equal(d.y, [2, 4])

    def test_response_only(self, tmp_path):
        d = read_csv(write(tmp_path / "a.csv", "y\n1\n2\n"))
        assert d.n == 2 and d.x is None

    def test_non_numeric_line(self, tmp_path):
        with pytest.raises(InputError, match="line 2"):
            read_csv(write(tmp_path / "a.csv", "x,y\n1,abc\n"))

    def test_ragged_line(self, tmp_path):
        with pytest.raises(InputError, match="line 3"):
            read_csv(write(tmp_path / "a.csv", "x,y\n1,2\n3\n"))

    def test_no_rows(self, tmp_path):
        with pytest.raises(InputError):
            read_csv(write(tmp_path / "a.csv", "x,y\n"))


class TestParse:
    def test_defaults_filled(self):
        args = parse_args(["simulate-mnm", "--study", "gaussian", "--n", "10", "--reps", "200", "--seed", "42"])
        assert args.n == (10,) and args.reps == 200 and args.seed == 42
        assert args.methods == ("mle", "js", "am") and args.duality == "l1" and args.A == 0.01

    @pytest.mark.parametrize("argv", [
        ["simulate-mnm", "--n", "3"],
        ["simulate-mnm", "--n", "10,3"],
        ["simulate-mnm", "--duality", "l3"],
        ["simulate-mnm", "--bogus"],
        ["simulate-mnm", "--reps", "0"],
        ["simulate-mnm", "--methods", "mle,lasso"],
        ["fit-reg", "--train", "a.csv"],
        ["oracle-simple", "--tol", "-1"],
        [],
    ])
    def test_usage_errors_exit_2(self, argv, capsys):
        with pytest.raises(SystemExit) as exc:
            main(argv)
        assert exc.value.code == 2
        assert capsys.readouterr().err

    def test_bad_flag_named_in_message(self, capsys):
        with pytest.raises(SystemExit):
            main(["simulate-mnm", "--n", "3"])
        assert "--n" in capsys.readouterr().err


class TestCommands:
    def test_oracle_simple(self, capsys):
        code, out, _ = run(["oracle-simple", "--n", "25", "--ybar", "0.1", "--boot", "200"], capsys)
        assert code == 0
        res = json.loads(out)
        assert res["exact"] == pytest.approx(0.059771, abs=1e-6)
        assert res["abs_diff"] == pytest.approx(abs(res["monte_carlo"] - res["exact"]), abs=1e-9)

    def test_symmetric_sample(self):
        y = symmetric_sample(25, 0.1, seed=3)
        assert y.mean() == pytest.approx(0.1, abs=1e-14)
        assert np.mean((y - 0.1) ** 2) == pytest.approx(1.0, abs=1e-12)

    def test_fit_mnm_reports_support(self, tmp_path, capsys):
        y = np.random.default_rng(0).normal(size=8)
        path = write(tmp_path / "y.csv", "y\n" + "\n".join(map(str, y)) + "\n")
        code, out, _ = run(["fit-mnm", "--train", path, *FAST], capsys)
        assert code == 0
        res = json.loads(out)
        eta, alpha = np.array(res["eta"]), np.array(res["alpha"])
        assert eta.size == alpha.size == 8 and np.all(np.diff(eta) >= 0)
        assert alpha.sum() == pytest.approx(1.0, abs=1e-8)
        assert len(res["per_method"]["am"]["posterior_mean"]) == 8
        assert {"config", "per_method", "theta", "lambda", "diagnostics"} <= res.keys()

    def test_fit_reg(self, tmp_path, capsys):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(40, 3))
        y = x @ [1.0, 0.0, -1.0] + 0.1 * rng.normal(size=40)

        def table(rows):
            return "a,b,c,y\n" + "\n".join(",".join(map(str, r)) for r in rows) + "\n"

        train = write(tmp_path / "tr.csv", table(np.column_stack([x[:20], y[:20]])))
        test = write(tmp_path / "te.csv", table(np.column_stack([x[20:], y[20:]])))
        code, out, _ = run(["fit-reg", "--train", train, "--test", test, "--folds", "5", *FAST], capsys)
        assert code == 0
        res = json.loads(out)["per_method"]
        assert set(res) == {"am", "lasso", "ridge"}
        assert all(r["test_mse"] < 0.5 for r in res.values())

    def test_baseline_js_formula(self, capsys):
        code, out, _ = run(["baseline-js", "--n", "10,20"], capsys)
        assert code == 0
        assert json.loads(out)["per_method"]["js"]["mean_mpe"][0] == pytest.approx(0.306931, abs=1e-6)

    def test_study_csv_has_one_row_per_method(self, capsys):
        code, out, _ = run(["simulate-mnm", "--methods", "mle,js", "--n", "10,20", "--reps", "5",
                            "--format", "csv"], capsys)
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == "method,n=10,n=20" and len(lines) == 3

    def test_missing_file_exits_1(self, tmp_path, capsys):
        code, _, err = run(["fit-mnm", "--train", str(tmp_path / "nope.csv")], capsys)
        assert code == 1 and "error" in err

    def test_bad_file_exits_1(self, tmp_path, capsys):
        path = write(tmp_path / "bad.csv", "y\n1\nfoo\n")
        code, _, err = run(["fit-mnm", "--train", path], capsys)
        assert code == 1 and "line 3" in err

    def test_unwritable_output_exits_1(self, tmp_path, capsys):
        code, _, _ = run(["baseline-js", "--out", str(tmp_path / "missing" / "out.json")], capsys)
        assert code == 1

    def test_writes_to_file(self, tmp_path, capsys):
        out = tmp_path / "r.json"
        assert main(["baseline-js", "--out", str(out)]) == 0
        assert json.loads(out.read_text())["config"]["A"] == 0.01


def test_study_csv_round_trip(tmp_path):
    result = {"config": {"n": [10, 20, 50]},
              "per_method": {"mle": {"mean_mpe": [1.0223456789123, 0.97, 0.985]},
                             "js": {"mean_mpe": [1 / 3, 2 / 7, 1e-12]}}}
    path = tmp_path / "t.csv"
    path.write_text(format_study_csv(result))
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["method", "n=10", "n=20", "n=50"]
    for row in rows[1:]:
        orig = result["per_method"][row[0]]["mean_mpe"]
        for cell, v in zip(row[1:], orig):
            assert float(cell) == float(f"{v:.10g}")


@pytest.mark.parametrize("argv", [
    ["simulate-mnm", "--n", "6", "--reps", "2", "--boot", "4", "--seed", "7"],
    ["oracle-simple", "--boot", "50", "--seed", "3"],
])
def test_repeat_runs_byte_identical(argv):
    cmd = [sys.executable, "-m", "automodeling", *argv]
    first = subprocess.run(cmd, capture_output=True, check=True).stdout
    second = subprocess.run(cmd, capture_output=True, check=True).stdout
    assert first == second and first.startswith(b"{")


def test_module_entry_point_usage_error():
    proc = subprocess.run([sys.executable, "-m", "automodeling", "simulate-mnm", "--n", "3"],
                          capture_output=True)
    assert proc.returncode == 2
