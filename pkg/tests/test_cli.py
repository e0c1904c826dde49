import json
import math
import subprocess
import sys

import numpy as np
import pytest

from robustci.cli import main
from robustci.model import Dataset, write_dataset_csv


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def data_file(tmp_path, capsys):
    path = tmp_path / "d.csv"
    code, out, _ = run(
        ["generate", "--n", "200", "--p", "20", "--epsilon", "0.4", "--noise", "gaussian", "--seed", "7", "--out", str(path)],
        capsys,
    )
    assert code == 0
    return path, out


def noiseless_file(tmp_path, n=120, p=4):
    X = np.random.default_rng(0).standard_normal((n, p))
    b = np.array([2.0] + [1.0] * (p - 1))
    path = tmp_path / "exact.csv"
    with open(path, "w", newline="") as fh:
        write_dataset_csv(Dataset(X @ b, X), fh)
    return path


class TestGenerate:
    def test_rows_and_report(self, data_file):
        path, out = data_file
        assert len(path.read_text().splitlines()) == 201
        assert "seed=7" in out and out.startswith("b=0.0,")

    def test_deterministic(self, tmp_path, capsys, data_file):
        path, _ = data_file
        other = tmp_path / "e.csv"
        main(["generate", "--n", "200", "--p", "20", "--epsilon", "0.4", "--noise", "gaussian", "--seed", "7", "--out", str(other)])
        assert path.read_bytes() == other.read_bytes()

    def test_epsilon_one(self, tmp_path, capsys):
        code, _, err = run(["generate", "--n", "10", "--p", "2", "--epsilon", "1.0", "--out", str(tmp_path / "x")], capsys)
        assert code == 1 and "epsilon < 1" in err

    def test_b_list(self, tmp_path, capsys):
        code, out, _ = run(["generate", "--n", "10", "--p", "2", "--b", "1,2", "--seed", "1", "--out", str(tmp_path / "x")], capsys)
        assert code == 0 and "b=1.0,2.0" in out
        code, _, _ = run(["generate", "--n", "10", "--p", "2", "--b", "1", "--out", str(tmp_path / "x")], capsys)
        assert code == 1

    def test_seed_printed_when_absent(self, tmp_path, capsys):
        code, out, _ = run(["generate", "--n", "10", "--p", "2", "--out", str(tmp_path / "x")], capsys)
        assert code == 0 and "seed=" in out

    def test_write_failure(self, tmp_path, capsys):
        code, _, _ = run(["generate", "--n", "10", "--p", "2", "--out", str(tmp_path / "no" / "x.csv")], capsys)
        assert code == 2

    def test_unknown_flag(self, tmp_path, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["generate", "--n", "10", "--p", "2", "--out", "x", "--bogus"])
        assert exc.value.code == 1


class TestCi:
    def test_noiseless(self, tmp_path, capsys):
        code, out, _ = run(["ci", "--in", str(noiseless_file(tmp_path)), "--coef", "1"], capsys)
        method, coef, lo, hi, alpha = out.strip().split(",")
        assert code == 0 and method == "alg1" and coef == "1" and alpha == "0.05"
        assert float(lo) <= 2.0 <= float(hi)

    @pytest.mark.parametrize("method", ["alg1", "alg1-ga", "ols-t"])
    def test_methods(self, data_file, capsys, method):
        path, _ = data_file
        code, out, _ = run(["ci", "--in", str(path), "--method", method, "--coef", "3"], capsys)
        assert code == 0 and out.count("\n") == 1 and out.startswith(method + ",3,")

    def test_rb_deterministic(self, tmp_path, capsys):
        path = noiseless_file(tmp_path, n=40, p=3)
        argv = ["ci", "--in", str(path), "--method", "rb", "--seed", "1", "--bootstrap-reps", "30"]
        a = run(argv, capsys)
        b = run(argv, capsys)
        assert a[0] == 0 and a[1] == b[1]

    def test_unbounded_rendering(self, tmp_path, capsys):
        X = np.random.default_rng(1).standard_normal((4, 2))
        path = tmp_path / "tiny.csv"
        with open(path, "w", newline="") as fh:
            write_dataset_csv(Dataset(np.arange(4.0), X), fh)
        code, out, _ = run(["ci", "--in", str(path)], capsys)
        assert code == 0 and out.strip().split(",")[2:4] == ["-inf", "inf"]

    def test_coef_zero(self, data_file, capsys):
        path, _ = data_file
        assert run(["ci", "--in", str(path), "--coef", "0"], capsys)[0] == 1

    def test_bad_csv(self, tmp_path, capsys):
        path = tmp_path / "bad.csv"
        path.write_text("y,x1,x2\n1,2,3\n4,oops,6\n7,8,9\n")
        code, _, err = run(["ci", "--in", str(path)], capsys)
        assert code == 2 and "row 3, column 2" in err

    def test_missing_file(self, tmp_path, capsys):
        assert run(["ci", "--in", str(tmp_path / "none.csv")], capsys)[0] == 2

    def test_n_not_above_p(self, tmp_path, capsys):
        path = tmp_path / "np.csv"
        path.write_text("y,x1,x2\n1,2,3\n4,5,7\n")
        assert run(["ci", "--in", str(path)], capsys)[0] == 2


class TestSimulate:
    ARGS = ["--methods", "alg1,ols-t", "--n-values", "30", "--p", "3", "--epsilons", "0,0.3",
            "--replicates", "3", "--master-seed", "5", "--no-timing"]

    def test_inline(self, tmp_path, capsys):
        out_path = tmp_path / "r.csv"
        code, out, _ = run(["simulate", "--out", str(out_path), "--jobs", "1", *self.ARGS], capsys)
        assert code == 0
        lines = out_path.read_text().splitlines()
        assert len(lines) == 1 + 4 and lines[0].startswith("method,n,p,epsilon")
        assert out.count("coverage=") == 4

    def test_jobs_identical(self, tmp_path, capsys):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["simulate", "--out", str(a), "--jobs", "1", *self.ARGS]) == 0
        assert main(["simulate", "--out", str(b), "--jobs", "4", *self.ARGS]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_config_file(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"methods": ["quantile-loc"], "n_values": [50], "p": 1, "replicates": 5, "master_seed": 3, "timing": False}))
        out_path = tmp_path / "r.csv"
        code, _, _ = run(["simulate", "--config", str(cfg), "--out", str(out_path)], capsys)
        assert code == 0 and out_path.read_text().splitlines()[1].startswith("quantile-loc,50,1,")

    @pytest.mark.parametrize(
        "extra",
        [
            ["--methods", "bogus"],
            ["--epsilons", "1.2"],
            ["--jobs", "0"],
            ["--config", "/nonexistent.json"],
        ],
    )
    def test_invalid(self, tmp_path, capsys, extra):
        code, _, _ = run(["simulate", "--out", str(tmp_path / "r.csv"), *extra], capsys)
        assert code == 1

    def test_config_conflict(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text("{}")
        code, _, _ = run(["simulate", "--config", str(cfg), "--replicates", "2", "--out", str(tmp_path / "r")], capsys)
        assert code == 1

    def test_missing_out(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["simulate", *self.ARGS])
        assert exc.value.code == 1

    def test_seed_printed(self, tmp_path, capsys):
        args = [a for a in self.ARGS]
        i = args.index("--master-seed")
        del args[i : i + 2]
        code, out, _ = run(["simulate", "--out", str(tmp_path / "r.csv"), "--jobs", "1", *args], capsys)
        assert code == 0 and out.startswith("master_seed=")


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "robustci", "ci", "--in", str(noiseless_file(tmp_path)), "--method", "ols-t"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    lo, hi = map(float, proc.stdout.strip().split(",")[2:4])
    assert math.isclose(lo, 2.0, abs_tol=1e-9) and math.isclose(hi, 2.0, abs_tol=1e-9)


def test_no_subcommand():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 1
