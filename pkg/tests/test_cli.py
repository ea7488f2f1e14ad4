import json
import subprocess
import sys

import numpy as np
import pytest

from spoints import cli

SMALL = """
[run]
n = 10
m = 1
scan_resolution = 8
l_max = 1
n_k = 64
{extra}

[potential]
shape = gaussian
depth = -8
"""


def write(tmp_path, extra=""):
    f = tmp_path / "run.ini"
    f.write_text(SMALL.format(extra=extra))
    return f


def run(tmp_path, command, extra="", *flags):
    f = write(tmp_path, extra)
    out = tmp_path / "out"
    code = cli.main([command, "--config", str(f), "--out", str(out), *flags])
    report = json.loads((out / "report.json").read_text()) if (out / "report.json").exists() else None
    return code, report, out


def test_convention_ok(tmp_path):
    code, rep, out = run(tmp_path, "convention")
    assert code == 0 and rep["exit_code"] == 0
    assert rep["schema"] == "spoints.report/1"
    assert rep["stages"]["convention"]["ok"]
    assert (out / "timings.json").exists()
    assert "time" not in json.dumps(rep["stages"])


def test_convention_violation_exit_1(tmp_path):
    code, rep, _ = run(tmp_path, "convention", "tau_conv = 10")
    assert code == 1 and rep["exit_code"] == 1 and "error" in rep


def test_input_errors_exit_2(tmp_path):
    assert cli.main(["radial", "--config", str(tmp_path / "missing.ini")]) == 2
    assert cli.main(["bogus", "--config", "x"]) == 2
    f = write(tmp_path)
    assert cli.main(["radial", "--config", str(f), "--n", "99"]) == 2
    assert cli.main(["radial", "--config", str(f), "--alpha-range", "1:0:1"]) == 2


def test_square_well_volume_refused(tmp_path):
    f = tmp_path / "run.ini"
    f.write_text("[run]\nn = 8\n[potential]\nshape = well\ndepth = -1\n")
    assert cli.main(["convention", "--config", str(f), "--out", str(tmp_path / "o")]) == 2


def test_numerical_failure_exit_3(tmp_path):
    code, rep, _ = run(tmp_path, "levinson", "k_max = 2")
    assert code == 3 and "k_max" in rep["error"]


def test_radial_stage_outputs(tmp_path):
    code, rep, out = run(tmp_path, "radial")
    assert code == 0
    st = rep["stages"]["radial"]
    assert st["N"][:2] == [1, 0]
    header = (out / "radial.csv").read_text().splitlines()[0]
    assert header.startswith("#")
    assert np.loadtxt(out / "radial.csv").ndim == 2


def test_sweep_refuses_critical_crossing(tmp_path):
    code, rep, _ = run(tmp_path, "sweep", "alpha_range = 0.5:1.5:0.5")
    assert code == 2
    code, rep, out = run(tmp_path, "sweep", "alpha_range = 0.25:0.75:0.25")
    assert code == 0
    assert (out / "sweep_counts.csv").exists()


def test_module_entry_point(tmp_path):
    f = write(tmp_path)
    res = subprocess.run([sys.executable, "-m", "spoints", "convention", "--config", str(f),
                          "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert res.returncode == 0
    assert "exit 0" in res.stdout


def test_clean_rounds_and_is_stable():
    d = cli._clean({"a": np.float64(1 / 3), "b": np.array([1, 2]), "c": (np.True_, float("nan"))})
    assert d == {"a": 0.333333333333, "b": [1, 2], "c": [True, "nan"]}


def test_sweep_reports_conjecture_probe(tmp_path):
    code, rep, _ = run(tmp_path, "sweep", "alpha_range = 1.5:2.0:0.5\nallow_critical = yes")
    assert code == 0
    probe = rep["stages"]["sweep"]["conjecture_probe"]
    assert probe["kind"].startswith("conjecture")
    assert all(r["probe_consistent"] for r in rep["stages"]["sweep"]["rows"])
