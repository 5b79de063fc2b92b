from __future__ import annotations

import json
import subprocess
import sys

import numpy as np
import pytest

from periodica.cli import main
from periodica.timeseries import read_timeseries, serialize_timeseries

from conftest import noisy_harmonic


@pytest.fixture
def data(tmp_path):
    path = tmp_path / "data.csv"
    path.write_text(serialize_timeseries(noisy_harmonic(n=50, amp=2.0, seed=3)))
    return path


def run(*argv):
    return main([str(a) for a in argv])


class TestPeriodogram:
    def test_files(self, data, tmp_path):
        out = tmp_path / "pg"
        assert run("periodogram", "--input", data, "--grid", 500, "--out", out) == 0
        rows = (out / "periodogram.csv").read_text().splitlines()
        assert rows[0] == "theta,power" and len(rows) == 501
        assert (out / "peaks.csv").read_text().startswith("theta,power\n")
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "periodogram" and len(manifest["input_sha256"]) == 64

    def test_grid_two(self, data, tmp_path):
        assert run("periodogram", "--input", data, "--grid", 2, "--out", tmp_path / "g2") == 0
        assert len((tmp_path / "g2" / "periodogram.csv").read_text().splitlines()) == 3

    def test_missing_sigma_column(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("t,y\n0,1\n")
        assert run("periodogram", "--input", bad, "--out", tmp_path / "x") == 2
        assert "line 1" in capsys.readouterr().err

    def test_bad_row(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("t,y,sigma\n0,1,1\n1,2,-3\n")
        assert run("periodogram", "--input", bad, "--out", tmp_path / "x") == 2
        assert "line 3" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert run("periodogram", "--input", tmp_path / "nope.csv", "--out", tmp_path / "x") == 2


class TestConfset:
    def test_table_and_nesting(self, data, tmp_path):
        for a in ("0.05", "0.01"):
            assert run("confset", "--input", data, "--theta-min", 0.5, "--theta-max", 30, "--grid", 800,
                       "--replicates", 300, "--alpha", a, "--out", tmp_path / a) == 0
        acc = {a: set(json.loads((tmp_path / a / "confset.json").read_text())["accepted"])
               for a in ("0.05", "0.01")}
        assert acc["0.05"] <= acc["0.01"]
        rows = (tmp_path / "0.05" / "pvalues.csv").read_text().splitlines()
        assert rows[0] == "theta0,pvalue,in_95,in_99"
        assert any(r.split(",")[1] == "1.0" for r in rows[1:])

    def test_threads_byte_identical(self, data, tmp_path):
        args = ["confset", "--input", data, "--grid", 600, "--replicates", 200]
        assert run(*args, "--threads", 1, "--out", tmp_path / "a") == 0
        assert run(*args, "--threads", 3, "--out", tmp_path / "b") == 0
        for name in ("pvalues.csv", "confset.json", "periodogram.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


class TestOtherCommands:
    def test_simulate_midnight_window(self, tmp_path):
        assert run("simulate", "--design", "iii", "--n", 500, "--out", tmp_path) == 0
        ts = read_timeseries(tmp_path / "simulated.csv")
        frac = ts.times - np.floor(ts.times)
        assert ts.n == 500 and np.all(np.abs(frac - 0.75) <= 0.0208 + 1e-12)

    def test_nptest(self, data, tmp_path):
        assert run("nptest", "--input", data, "--grid", 300, "--replicates", 50,
                   "--theta0", 3.3, "--quantum", 0.05, "--out", tmp_path) == 0
        doc = json.loads((tmp_path / "nptest.json").read_text())
        assert doc["mode"] == "nonparametric" and doc["quantum"] == 0.05
        assert "class_size_histogram" in doc["outcomes"][0]["details"]["partition"]

    def test_design(self, data, tmp_path):
        assert run("design", "--input", data, "--theta-min", 0.5, "--theta-max", 30, "--grid", 300,
                   "--replicates", 100, "--r-design", 2, "--mode", "augment", "--extra-n", "0,5",
                   "--theta-hat", 3.3, "--out", tmp_path) == 0
        doc = json.loads((tmp_path / "design.json").read_text())
        assert [r["extra_n"] for r in doc["rows"]] == [0, 5]

    def test_peakdist_and_coverage(self, tmp_path):
        assert run("peakdist", "--design", "example1", "--n", 30, "--reps", 4, "--out", tmp_path / "p") == 0
        assert (tmp_path / "p" / "peak_distribution.csv").exists()
        assert run("coverage", "--design", "i", "--n", 20, "--reps", 2, "--replicates", 30,
                   "--resolution", 1.0, "--out", tmp_path / "c") == 0
        assert json.loads((tmp_path / "c" / "coverage.json").read_text())["reps"] == 2


class TestRerun:
    def test_golden(self, data, tmp_path):
        first = tmp_path / "first"
        assert run("confset", "--input", data, "--grid", 400, "--replicates", 100, "--out", first) == 0
        again = tmp_path / "again"
        assert run("rerun", first / "manifest.json", "--threads", 2, "--out", again) == 0
        for name in ("pvalues.csv", "confset.json", "periodogram.csv"):
            assert (first / name).read_bytes() == (again / name).read_bytes()

    def test_changed_input_rejected(self, data, tmp_path):
        out = tmp_path / "r"
        assert run("periodogram", "--input", data, "--grid", 10, "--out", out) == 0
        data.write_text(data.read_text() + "1000,1,1\n")
        assert run("rerun", out / "manifest.json", "--out", tmp_path / "r2") == 2


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "periodica.cli", "periodogram", "--input",
                          str(tmp_path / "missing.csv"), "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert res.returncode == 2 and "error" in res.stderr
