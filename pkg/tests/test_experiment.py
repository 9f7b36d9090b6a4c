"""Experiment runner, config round trip, validation battery, CLI surface."""

import json
import os

import numpy as np
import pytest

from thermoenclosure.cli import main as cli_main
from thermoenclosure.experiment import (ExperimentConfig, run_experiment,
                                        validate, validate_identity_battery)
from thermoenclosure.geometry import Ball, Scene
from thermoenclosure.probes import Material, Probe


def bench_config(**over):
    cfg = ExperimentConfig(
        material=Material(rho=1.0, mu=1.0, lam=1.0, m=0.5),
        scene=Scene(Ball((0, 0, 0), 1.0), Ball((0, 0, 0), 0.3)),
        probes=[Probe("shear", (2.0, 0, 0), 0.2, direction=(0, 0, 1.0),
                      label="s1")],
        mode="tau", tau_min=4.0, tau_max=7.0, tau_count=6,
        refinement=1, order=2, n_layers=3)
    for k, v in over.items():
        setattr(cfg, k, v)
    return cfg


def test_config_json_roundtrip():
    cfg = bench_config()
    text = cfg.to_json()
    back = ExperimentConfig.from_json(text)
    assert back.to_json() == text
    assert back.material.m == 0.5
    assert back.probes[0].kind == "shear"


def test_config_validation():
    cfg = bench_config(tau_count=3)
    with pytest.raises(Exception):
        cfg.taus()
    # overlapping probe ball rejected before any numerics
    bad = bench_config(probes=[Probe("heat", (1.05, 0, 0), 0.2)])
    with pytest.raises(ValueError):
        bad.validate_geometry()


def test_run_experiment_outputs_and_determinism(tmp_path):
    cfg = bench_config()
    m1 = run_experiment(cfg, tmp_path / "run1")
    m2 = run_experiment(cfg, tmp_path / "run2")
    for name in ("mesh.tetmesh", "sweep_s1.csv", "estimates.csv",
                 "enclosure.vtk", "manifest.json"):
        assert (tmp_path / "run1" / name).exists()
    a = (tmp_path / "run1" / "sweep_s1.csv").read_bytes()
    b = (tmp_path / "run2" / "sweep_s1.csv").read_bytes()
    assert a == b
    assert (tmp_path / "run1" / "estimates.csv").read_bytes() == \
        (tmp_path / "run2" / "estimates.csv").read_bytes()
    # manifest echoes the config
    man = json.loads((tmp_path / "run1" / "manifest.json").read_text())
    assert man["config"]["tau_grid"]["count"] == 6
    assert m1["outputs"] == m2["outputs"]


def test_run_experiment_no_probes(tmp_path):
    cfg = bench_config(probes=[])
    manifest = run_experiment(cfg, tmp_path / "empty")
    assert any("no probes" in w for w in manifest["warnings"])
    assert (tmp_path / "empty" / "manifest.json").exists()


def test_run_experiment_parallel_matches_serial(tmp_path):
    cfg = bench_config()
    run_experiment(cfg, tmp_path / "ser", workers=1)
    run_experiment(cfg, tmp_path / "par", workers=3)
    assert (tmp_path / "ser" / "sweep_s1.csv").read_bytes() == \
        (tmp_path / "par" / "sweep_s1.csv").read_bytes()


def test_identity_battery():
    assert validate_identity_battery(n_matrices=1000, n_moduli=20) == 0


def test_validate_quick_small(tmp_path):
    cfg = bench_config()
    # smaller case count here; the full 200-case battery runs in acceptance
    from thermoenclosure.experiment import validate_appendix
    rows, failures = validate_appendix(seed=7, n_cases=30)
    assert len(failures) == 0
    assert all(r["rel_err"] <= 1e-8 for r in rows)


def test_cli_surface(tmp_path):
    cfg = bench_config()
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(cfg.to_json())
    out = str(tmp_path / "out")
    assert cli_main(["mesh", "--config", str(cfg_path), "--out", out]) == 0
    assert os.path.exists(os.path.join(out, "mesh.tetmesh"))
    assert cli_main(["solve", "--config", str(cfg_path), "--out", out,
                     "--tau", "4.0"]) == 0
    assert cli_main(["sweep", "--config", str(cfg_path), "--out", out]) == 0
    assert cli_main(["extract", "--config", str(cfg_path), "--out", out]) == 0
    assert cli_main(["enclose", "--config", str(cfg_path), "--out", out,
                     "--grid", "16"]) == 0
    assert os.path.exists(os.path.join(out, "enclosure.vtk"))
    # bad scene -> validation exit code 2 before numerics
    bad = bench_config(probes=[Probe("heat", (1.05, 0, 0), 0.2)])
    bad_path = tmp_path / "bad.json"
    bad_path.write_text(bad.to_json())
    assert cli_main(["run", "--config", str(bad_path), "--out", out]) == 2


def test_time_mode_run(tmp_path):
    cfg = bench_config(mode="time", horizon=2.0, n_steps=64,
                       tau_min=3.0, tau_max=6.0, tau_count=5)
    manifest = run_experiment(cfg, tmp_path / "time")
    assert (tmp_path / "time" / "sweep_s1.csv").exists()
    # horizon below the guaranteed-slope bound: warn, not fail
    assert any("below the guaranteed-slope bound" in w
               for w in manifest["warnings"])
