import json
import subprocess
import sys

import numpy as np
import pytest

from priceformation import Equilibrium, ModelParams, NonpositiveSlope, make_grid, sample, write_csv
from priceformation import cli

PARAMS = {"A": 1.0, "B": 2.0, "a": 0.4}


def write(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def test_equilibrium(tmp_path, capsys):
    cfg = write(tmp_path, {"params": PARAMS, "masses": {"m1": 0.2, "m2": 0.4}})
    assert cli.main(["equilibrium", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    out = json.loads((tmp_path / "o" / "equilibrium.json").read_text())
    assert out["p0"] == pytest.approx(0.0666667, abs=1e-6)
    assert out["lambda0"] == pytest.approx(0.576923, abs=1e-6)


@pytest.mark.parametrize("obj", [
    {"params": PARAMS, "masses": {"m1": 0.01, "m2": 5.0}},
    {"params": {"A": 1.0, "B": 1.0, "a": 1.5}, "masses": {"m1": 0.3, "m2": 0.3}},
    {"masses": {"m1": 0.3, "m2": 0.3}},
])
def test_equilibrium_config_errors(tmp_path, obj):
    assert cli.main(["equilibrium", "--config", write(tmp_path, obj)]) == 2


def test_missing_config(tmp_path):
    assert cli.main(["simulate", "--config", str(tmp_path / "nope.json")]) == 2


def test_spectrum(tmp_path):
    cfg = write(tmp_path, {"params": {"A": 1.0, "B": 1.0, "a": 0.4}, "count": 4, "plots": True})
    assert cli.main(["spectrum", "--config", cfg, "--out", str(tmp_path)]) == 0
    sp = json.loads((tmp_path / "spectrum.json").read_text())
    assert sp["gap"] == pytest.approx(15.4213, abs=1e-3)
    rows = (tmp_path / "spectrum.csv").read_text().splitlines()
    assert rows[0] == "alpha,mu,dim,family,case" and len(rows) == 5
    assert (tmp_path / "eigenfunctions.svg").exists()


def test_simulate_and_seed(tmp_path):
    cfg = write(tmp_path, {"params": {"A": 1.0, "B": 1.0, "a": 0.4},
                           "masses": {"m1": 0.3, "m2": 0.3},
                           "perturbation": {"kind": "random-smooth", "amplitude": 0.02},
                           "n": 201, "t_end": 0.1})
    assert cli.main(["simulate", "--config", cfg, "--out", str(tmp_path / "s"), "--seed", "4"]) == 0
    s = json.loads((tmp_path / "s" / "summary.json").read_text())
    assert s["config"]["seed"] == 4


def test_project(tmp_path):
    prm = ModelParams(1.0, 1.0, 0.4)
    g = make_grid(prm, 401)
    write_csv(sample(Equilibrium(0.0, 0.9375), g), tmp_path / "f.csv")
    cfg = write(tmp_path, {"params": {"A": 1.0, "B": 1.0, "a": 0.4}})
    assert cli.main(["project", "--config", cfg, "--csv", str(tmp_path / "f.csv"),
                     "--out", str(tmp_path)]) == 0
    k = json.loads((tmp_path / "projection.json").read_text())
    assert k["I1"] == pytest.approx(0.3, abs=1e-12) and k["I2"] == pytest.approx(-0.3, abs=1e-12)
    assert k["c"] == pytest.approx(-0.9375, abs=1e-10) and k["d"] == pytest.approx(0, abs=1e-10)


def test_convergence_levels_two(tmp_path):
    cfg = write(tmp_path, {"params": {"A": 1.0, "B": 1.0, "a": 0.4},
                           "masses": {"m1": 0.3, "m2": 0.3}, "n": 201, "levels": 2})
    assert cli.main(["convergence", "--config", cfg]) == 2


def test_sweep_empty(tmp_path, capsys):
    cfg = write(tmp_path, {"params": {"A": 1.0, "B": 1.0, "a": 0.4}, "chi": 0.5, "count": 0})
    assert cli.main(["sweep", "--config", cfg]) == 0
    assert json.loads(capsys.readouterr().out)["cases"] == []


def test_solver_failure_exit(tmp_path, monkeypatch):
    def boom(cfg, write=True):
        raise NonpositiveSlope("slope lost", t=0.1)
    monkeypatch.setattr(cli, "run_scenario", boom)
    cfg = write(tmp_path, {"params": {"A": 1.0, "B": 1.0, "a": 0.4},
                           "masses": {"m1": 0.3, "m2": 0.3}, "n": 201})
    assert cli.main(["simulate", "--config", cfg]) == 3


def test_module_entry(tmp_path):
    cfg = write(tmp_path, {"params": {"A": 1.0, "B": 1.0, "a": 0.4}, "masses": {"m1": 0.3, "m2": 0.3}})
    r = subprocess.run([sys.executable, "-m", "priceformation", "equilibrium", "--config", cfg],
                       capture_output=True, text=True)
    assert r.returncode == 0 and json.loads(r.stdout)["lambda0"] == pytest.approx(0.9375)
