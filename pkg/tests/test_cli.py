import json
import subprocess
import sys
from pathlib import Path

import pytest

from pqgl.cli import main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def run(*args, cwd=None):
    return subprocess.run([sys.executable, "-m", "pqgl", *args], capture_output=True, text=True, cwd=cwd)


def test_classify_limit_gap_config(tmp_path):
    res = run("classify", "--config", str(CONFIGS / "limit_gap.ini"), "--out", str(tmp_path))
    assert res.returncode == 0, res.stderr
    report = json.loads(res.stdout)
    assert report["case"] == "LimitGap" and report["gap_bound"] == "7/6"
    assert json.loads((tmp_path / "classify.json").read_text()) == report


def test_classify_gap_violation_exits_one(tmp_path):
    res = run("classify", "--set", "integrand.q=3", "--out", str(tmp_path))
    assert res.returncode == 1
    assert json.loads(res.stdout)["error"] == "GapViolation"


def test_usage_and_config_errors_exit_two(tmp_path):
    assert run("frobnicate").returncode == 2
    assert run("classify", "--config", str(tmp_path / "missing.ini")).returncode == 2
    bad = tmp_path / "bad.ini"
    bad.write_text("[integrand]\np = two\n")
    assert run("classify", "--config", str(bad), "--out", str(tmp_path)).returncode == 2
    assert main(["classify", "--set", "nodot=1", "--out", str(tmp_path)]) == 2
    assert main(["classify", "--integrand", "nosuch", "--out", str(tmp_path)]) == 2


def test_permissive_flag(tmp_path):
    args = ["classify", "--set", "integrand.q=9/4", "--set", "integrand.alpha=1", "--out", str(tmp_path)]
    assert main(args) == 1
    assert main(args + ["--permissive"]) == 0
    assert json.loads((tmp_path / "classify.json").read_text())["case"] == "StrictGap"


def test_toolkit_selftest(tmp_path):
    assert main(["toolkit-selftest", "--out", str(tmp_path), "--seed", "3"]) == 0
    data = json.loads((tmp_path / "toolkit_selftest.json").read_text())
    assert data["seed"] == 3 and data["checks"]


def test_check_integrand_and_corrupted_constant(tmp_path):
    assert main(["check-integrand", "--out", str(tmp_path), "--set", "run.samples=2000"]) == 0
    assert (tmp_path / "check_integrand.json").exists()
    assert main(["check-integrand", "--out", str(tmp_path), "--set", "run.samples=2000",
                 "--set", "integrand.Lambda=3"]) == 1


def test_solve_ladder_writes_report_and_field(tmp_path):
    assert main(["solve", "--config", str(CONFIGS / "solve2d.ini"), "--grid", "17", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "solve_report.json").read_text())
    assert len(rep["ladder"]) == 4 and all(r["comparison_holds"] for r in rep["ladder"])
    assert (tmp_path / "field.bin").read_bytes().startswith(b"17 2\n")


def test_solve_non_convergence_exits_one(tmp_path):
    code = main(["solve", "--grid", "33", "--max-iter", "1", "--tol", "1e-14",
                 "--precondition", "none", "--out", str(tmp_path)])
    assert code == 1
    assert json.loads((tmp_path / "solve_report.json").read_text())["error"] == "NonConvergence"


def test_estimate_writes_rows(tmp_path):
    assert main(["estimate", "--grid", "17", "--gammas", "0,2", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "estimate.csv").read_text().splitlines()
    assert lines[0].startswith("regime,p,q,r,alpha") and len(lines) == 1 + 3 * 2


def test_scan_outputs(tmp_path, monkeypatch):
    monkeypatch.setenv("PQGL_THREADS", "2")
    assert main(["scan", "--config", str(CONFIGS / "scan2d.ini"), "--grid", "17", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "scan.csv").read_text().splitlines()
    assert lines[0].startswith("# generated ")
    assert any(line.endswith("GapViolation") for line in lines)
    assert sorted(p.name for p in tmp_path.glob("sweep_*.dat")) == [
        "sweep_LimitGap.dat", "sweep_StandardGrowth.dat", "sweep_StrictGap.dat"]


@pytest.mark.parametrize("threads", ["1", "3"])
def test_scan_is_deterministic(tmp_path, monkeypatch, threads):
    monkeypatch.setenv("PQGL_THREADS", threads)
    texts = []
    for name in ("a", "b"):
        assert main(["scan", "--grid", "17", "--seed", "5", "--out", str(tmp_path / name)]) == 0
        texts.append((tmp_path / name / "scan.csv").read_text().splitlines()[1:])
    assert texts[0] == texts[1]
