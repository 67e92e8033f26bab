import json

import pytest

from lspe_bound.cli import main

SMOKE = {
    "chain": "two_state", "basis": "two_state", "alpha": 0.5, "lambda": 0.9,
    "schedule": {"c": 0.5, "mu1": 0.5, "mu2": 0.9, "mu3": 0.5, "theta": 0.25},
    "horizon": 6000, "ensemble": 16, "estimation_n_max": 300, "estimation_ensemble": 100,
}


@pytest.fixture
def cfg_path(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(SMOKE))
    return p


def test_solve(cfg_path, capsys):
    assert main(["solve", "--config", str(cfg_path)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["r_star"] == pytest.approx([1.25, -1.875])


def test_mixing(cfg_path, capsys):
    assert main(["mixing", "--config", str(cfg_path), "--t-max", "10"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert len(doc["d"]) == 10 and doc["tau_min"] == pytest.approx(5.0625)


def test_ledger(cfg_path, tmp_path, capsys):
    assert main(["ledger", "--config", str(cfg_path), "--out", str(tmp_path / "o")]) == 0
    doc = json.loads((tmp_path / "o" / "ledger.json").read_text())
    assert doc["entries"]["C1"]["provenance"] == "estimated"
    assert "K3" in doc["entries"]


def test_run(cfg_path, tmp_path, capsys):
    assert main(["run", "--config", str(cfg_path), "--out", str(tmp_path), "--horizon", "200",
                 "--seed", "5"]) == 0
    lines = (tmp_path / "trajectory.csv").read_text().splitlines()
    assert len(lines) == 202


def test_verify_exit_code_and_seed(cfg_path, tmp_path, capsys):
    code = main(["verify", "--config", str(cfg_path), "--out", str(tmp_path / "a"), "--seed", "11"])
    assert code == 3   # nothing failed, but the uniform clause is vacuous
    report = json.loads((tmp_path / "a" / "report.json").read_text())
    assert report["config"]["master_seed"] == 11
    assert "SKIPPED-VACUOUS" in capsys.readouterr().out


def test_errors_exit_one(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(dict(SMOKE, ensemble=0)))
    assert main(["verify", "--config", str(p)]) == 1
    assert "ConstraintError" in capsys.readouterr().err
    assert main(["solve", "--config", str(p), "--threads", "0"]) == 1
