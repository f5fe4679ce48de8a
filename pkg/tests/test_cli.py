import json
import subprocess
import sys

import numpy as np
import pytest

from splineproj.basis import PeriodicBSplineBasis
from splineproj.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, main
from splineproj.gram import periodic_gram_matrix
from splineproj.knots import uniform_knots
from splineproj.output import FORMAT, read_csv, write_csv, write_json


def run(tmp_path, *argv):
    out = tmp_path / argv[0]
    code = main([*argv, "--out", str(out)])
    return code, out


def load_json(path):
    return json.loads(path.read_text())


class TestOutput:
    def test_csv(self, tmp_path):
        p = write_csv(tmp_path / "a.csv", {"b": 1, "a": [1.5, 2]}, ["x", "y"], [(0.1, float("nan")), (1, [2.0, 3.0])])
        lines = p.read_text().splitlines()
        assert lines[0] == f"# {FORMAT}"
        assert lines[1] == '# config: {"a":[1.5,2],"b":1}'
        header, rows = read_csv(p)
        assert header == ["x", "y"]
        assert rows == [["0.1", "nan"], ["1", "2.0;3.0"]]

    def test_json_non_finite(self, tmp_path):
        p = write_json(tmp_path / "a.json", {}, {"v": float("inf"), "w": np.float64(0.25), "z": np.arange(2)})
        doc = load_json(p)
        assert doc["format"] == FORMAT
        assert doc["v"] == "inf" and doc["w"] == 0.25 and doc["z"] == [0, 1]

    def test_atomic_no_leftovers(self, tmp_path):
        write_json(tmp_path / "sub" / "a.json", {}, {})
        assert [p.name for p in (tmp_path / "sub").iterdir()] == ["a.json"]


class TestCommands:
    def test_gram_periodic(self, tmp_path):
        code, out = run(tmp_path, "gram", "-k", "2", "--uniform", "8", "--periodic")
        assert code == EXIT_OK
        text = (tmp_path / "gram.gram.txt").read_text()
        assert text.startswith(f"# {FORMAT}\n# config: ")
        g = np.loadtxt(tmp_path / "gram.gram.txt")
        want = periodic_gram_matrix(PeriodicBSplineBasis(uniform_knots(8, 2))).to_dense()
        np.testing.assert_array_equal(g, want)
        for i in range(8):
            np.testing.assert_allclose(g[i], np.roll(g[0], i), atol=1e-17)
        inv = np.loadtxt(tmp_path / "gram.inverse.txt")
        np.testing.assert_allclose(inv @ g, np.eye(8), atol=1e-12)
        assert load_json(tmp_path / "gram.json")["circulant_deviation"] < 1e-16

    def test_gram_indicator_file(self, tmp_path):
        f = tmp_path / "k.txt"
        f.write_text("k 1 clamped\n0\n0.3\n1\n")
        code, _ = run(tmp_path, "gram", "--knots", str(f))
        assert code == EXIT_OK
        g = np.loadtxt(tmp_path / "gram.gram.txt")
        np.testing.assert_array_equal(g, np.diag(np.diag(g)))
        np.testing.assert_allclose(np.diag(g), [0.3, 0.7], rtol=1e-15)

    def test_bad_knot_file(self, tmp_path, capsys):
        f = tmp_path / "k.txt"
        f.write_text("k 2 clamped\n0\n0\n0.5\n0.5\n0.5\n1\n1\n")
        code, _ = run(tmp_path, "gram", "--knots", str(f))
        assert code == EXIT_CONFIG
        assert "MultiplicityViolation" in capsys.readouterr().err

    def test_lebesgue_indicator(self, tmp_path):
        code, _ = run(tmp_path, "lebesgue", "-k", "1", "--uniform", "32", "--periodic")
        assert code == EXIT_OK
        assert load_json(tmp_path / "lebesgue.json")["lebesgue"] == 1.0

    def test_converge(self, tmp_path):
        code, _ = run(tmp_path, "converge", "-k", "3", "--fn", "sin", "--ns", "16,32,64,128")
        assert code == EXIT_OK
        header, rows = read_csv(tmp_path / "converge.csv")
        sup = [float(r[header.index("sup_error")]) for r in rows]
        assert all(b < a for a, b in zip(sup, sup[1:]))
        doc = load_json(tmp_path / "converge.json")
        assert abs(doc["fitted_order"] - 3) < 0.25
        assert doc["tracked_distances"] == [None] * 4 and "weaker" in doc["scope"]

    def test_project_plot_script(self, tmp_path):
        code, _ = run(tmp_path, "project", "-k", "3", "--random", "20", "--fn", "step", "--seed", "3")
        assert code == EXIT_OK
        script = (tmp_path / "project.gp").read_text()
        assert script.startswith(f"# {FORMAT}")
        assert "'project.csv'" in script
        header, rows = read_csv(tmp_path / "project.csv")
        assert header == ["x", "f", "Pf", "error"]
        assert len(rows) == 20 * 8

    def test_decay_and_lemma2(self, tmp_path):
        assert run(tmp_path, "decay", "-k", "2", "--uniform", "64", "--clamped")[0] == EXIT_OK
        doc = load_json(tmp_path / "decay.json")
        assert all(doc["invariants"].values())
        assert run(tmp_path, "lemma2", "-k", "3", "--uniform", "64")[0] == EXIT_OK
        doc = load_json(tmp_path / "lemma2.json")
        assert all(doc["invariants"].values())

    def test_ensemble(self, tmp_path):
        code, _ = run(tmp_path, "ensemble", "-k", "2", "--trials", "3", "--seed", "7", "--ns", "16,32")
        assert code == EXIT_OK
        header, rows = read_csv(tmp_path / "ensemble.csv")
        assert len(rows) == 6
        assert load_json(tmp_path / "ensemble.json")["invariants"]["gamma_below_one"]


class TestExitCodes:
    def test_numerical(self, tmp_path, capsys):
        f = tmp_path / "k.txt"
        f.write_text("k 1 clamped\n0\n1e-16\n1\n")
        assert run(tmp_path, "gram", "--knots", str(f))[0] == EXIT_NUMERICAL
        assert "NotPositiveDefinite" in capsys.readouterr().err
        assert run(tmp_path, "decay", "-k", "2", "--uniform", "1", "--clamped")[0] == EXIT_NUMERICAL

    @pytest.mark.parametrize(
        "argv",
        [
            ["gram", "-k", "2"],
            ["gram", "--uniform", "4"],
            ["gram", "-k", "2", "--knots", "/nonexistent/knots.txt"],
            ["lemma2", "-k", "2", "--uniform", "8", "--clamped"],
            ["lemma2", "-k", "2", "--uniform", "8", "--cell", "9"],
            ["gram", "-k", "3", "--uniform", "2", "--periodic"],
            ["ensemble", "-k", "2", "--min-ratio", "0", "--ns", "8", "--trials", "1"],
        ],
    )
    def test_config(self, tmp_path, argv):
        assert main([*argv, "--out", str(tmp_path / "x")]) == EXIT_CONFIG

    def test_conflicting_mode(self, tmp_path):
        f = tmp_path / "k.txt"
        f.write_text("k 2 clamped\n0\n0\n1\n1\n")
        assert run(tmp_path, "gram", "--knots", str(f), "--periodic")[0] == EXIT_CONFIG
        assert run(tmp_path, "gram", "--knots", str(f), "-k", "3")[0] == EXIT_CONFIG

    def test_usage(self):
        with pytest.raises(SystemExit) as exc:
            main(["gram", "--bogus"])
        assert exc.value.code == 2

    def test_module_entry(self, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "splineproj", "lebesgue", "-k", "2", "--uniform", "8", "--out", str(tmp_path / "m")],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0
        assert (tmp_path / "m.json").exists()
