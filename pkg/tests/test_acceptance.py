"""Acceptance suite: one test per criterion, one PASS/FAIL line printed each.

Run with `pytest tests/test_acceptance.py -v -s` to see the lines.  The
benchmark configuration throughout: body = unit ball, concentric cavity of
radius 0.3, probe ball at (2,0,0) with eta = 0.2, all material constants 1
except the stress-temperature modulus m (0.5 for the coupled runs, 0 for
the decoupled ones); the true probe-to-cavity distance is 1.5.
"""

import time

import numpy as np
import pytest

from thermoenclosure.bounds import bound_check_sweep
from thermoenclosure.enclosure import classify_threshold, fit_distance
from thermoenclosure.experiment import (ExperimentConfig, run_experiment,
                                        run_sweep_tau, validate_appendix,
                                        validate_identity_battery)
from thermoenclosure.geometry import Ball, Scene, generate_benchmark_mesh
from thermoenclosure.indicator import TimeIndicator, indicator_point
from thermoenclosure.kernels import moment_scalar
from thermoenclosure.probes import Material, Probe, probe_field_tau
from thermoenclosure.solver import solve_tau, solve_time_reflected

BENCH = Scene(Ball((0, 0, 0), 1.0), Ball((0, 0, 0), 0.3))
PB = Ball((2.0, 0.0, 0.0), 0.2)
MAT = Material(rho=1.0, mu=1.0, lam=1.0, m=0.5, c=1.0, k=1.0, theta0=1.0)
MAT0 = Material(rho=1.0, mu=1.0, lam=1.0, m=0.0, c=1.0, k=1.0, theta0=1.0)
SHEAR = Probe("shear", (2.0, 0, 0), 0.2, direction=(0.0, 0.0, 1.0), label="s1")
PRESS = Probe("pressure", (2.0, 0, 0), 0.2, label="p1")
HEAT = Probe("heat", (2.0, 0, 0), 0.2, label="h1")
D_TRUE = 1.5


def _report(num, ok, text):
    print(f"\nACCEPTANCE {num:>2}: {'PASS' if ok else 'FAIL'} - {text}")
    assert ok, text


def _bench_cfg(probe, material, **over):
    cfg = ExperimentConfig(material=material, scene=BENCH, probes=[probe],
                           mode="tau", tau_min=4.0, tau_max=10.0, tau_count=13,
                           refinement=2, order=2, n_layers=5)
    for k, v in over.items():
        setattr(cfg, k, v)
    return cfg


def _read_csv(path):
    with open(path) as fh:
        lines = [ln.strip().split(",") for ln in fh if ln.strip()]
    header = lines[0]
    cols = {h: np.array([ln[i] for ln in lines[1:]]) for i, h in enumerate(header)}
    return cols


@pytest.fixture(scope="module")
def benchmark_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("bench")
    cfg = _bench_cfg(SHEAR, MAT)
    t0 = time.time()
    run_experiment(cfg, out)
    return {"dir": out, "cfg": cfg, "seconds": time.time() - t0}


def test_criterion_01_closed_forms_vs_oracle():
    t0 = time.time()
    rows, failures = validate_appendix(seed=20260808, n_cases=200, rtol=1e-8)
    dt = time.time() - t0
    worst = max(r["rel_err"] for r in rows)
    ok = len(failures) == 0 and len(rows) == 200 and dt <= 60.0
    _report(1, ok, f"closed forms vs oracle: {len(rows)} cases, worst rel err "
            f"{worst:.2e} (tol 1e-8), runtime {dt:.1f}s (limit 60s)")


def test_criterion_02_newtonian_limits():
    p = np.zeros(3)
    x2 = np.array([2.0, 0.0, 0.0])
    i0 = moment_scalar(0, x2, 1e-6, p, 1.0)
    i2 = moment_scalar(2, x2, 1e-6, p, 1.0)
    e0 = abs(i0 - 2.0 * np.pi / 3.0) / (2.0 * np.pi / 3.0)
    e2 = abs(i2 - 2.0 * np.pi / 5.0) / (2.0 * np.pi / 5.0)
    # heat probe decay rate is sqrt(c tau/k); tau = 1e-12 puts the rate at
    # the same 1e-6 regime as the moment checks (see the notes: at
    # tau = 1e-6 the definition itself sits exp(-2e-3) below 1/60)
    hp = Probe("heat", (0, 0, 0), 1.0)
    _, temp = probe_field_tau(hp, MAT, np.array([2.0, 0, 0]), 1e-12)
    eh = abs(temp - 1.0 / 60.0) * 60.0
    ok = e0 <= 1e-5 and e2 <= 1e-5 and eh <= 1e-5
    _report(2, ok, f"Newtonian limits: I0 err {e0:.1e}, I2 err {e2:.1e}, "
            f"heat probe err {eh:.1e} (tol 1e-5; heat at rate 1e-6)")


def test_criterion_03_identity_battery():
    t0 = time.time()
    bad = validate_identity_battery(seed=20260808, n_matrices=1000, n_moduli=20)
    ok = bad == 0
    _report(3, ok, f"identity battery: {bad} violations in 1000 matrices x "
            f"20 moduli pairs ({time.time() - t0:.1f}s)")


def test_criterion_04_null_test():
    nocav = Scene(Ball((0, 0, 0), 1.0))
    t0 = time.time()
    vals = []
    for level in (0, 1, 2):
        mesh = generate_benchmark_mesh(nocav, level)
        sol = solve_tau(mesh, MAT, SHEAR, 4.0, order=2)
        pt = indicator_point(sol, SHEAR, MAT, mesh, nocav, PB)
        vals.append(abs(pt.I1))
    r01 = vals[0] / vals[1]
    r12 = vals[1] / vals[2]
    ok = r01 >= 1.5 and r12 >= 1.5
    _report(4, ok, f"null test |I1| = {vals[0]:.2e} -> {vals[1]:.2e} -> "
            f"{vals[2]:.2e}; per-level factors {r01:.1f}x, {r12:.1f}x "
            f"(need >= 1.5x) in {time.time() - t0:.0f}s")


def test_criterion_05_shear_slope_recovery(benchmark_run):
    cols = _read_csv(benchmark_run["dir"] / "sweep_s1.csv")
    I1 = cols["I1"].astype(float)
    est = _read_csv(benchmark_run["dir"] / "estimates.csv")
    dhat = float(est["d_hat"][0])
    err = abs(dhat - D_TRUE) / D_TRUE
    ok = np.all(I1 > 0.0) and err <= 0.10
    _report(5, ok, f"shear tau-mode d_hat = {dhat:.4f} (true 1.5, err "
            f"{err:.1%}, tol 10%); all 13 indicator values positive: "
            f"{bool(np.all(I1 > 0))}; pipeline {benchmark_run['seconds']:.0f}s "
            "(limit 3600s)")


def test_criterion_06_pressure_slope_recovery():
    t0 = time.time()
    mesh = generate_benchmark_mesh(BENCH, 2, n_layers=5)
    cfg = _bench_cfg(PRESS, MAT0)
    sweep = run_sweep_tau(mesh, cfg, PRESS)
    I1 = sweep.values("I1")
    est = fit_distance(sweep.taus(), I1, MAT0, "pressure", eta=PRESS.eta)
    err = abs(est.d_hat - D_TRUE) / D_TRUE
    ok = err <= 0.10 and np.all(I1 > 0)
    _report(6, ok, f"pressure tau-mode d_hat = {est.d_hat:.4f} (err {err:.1%}, "
            f"tol 10%) in {time.time() - t0:.0f}s (limit 3600s)")


def test_criterion_07_heat_slope_and_horizon_independence():
    t0 = time.time()
    mesh2 = generate_benchmark_mesh(BENCH, 2, n_layers=5)
    cfg = _bench_cfg(HEAT, MAT0)
    sweep = run_sweep_tau(mesh2, cfg, HEAT)
    est_tau = fit_distance(sweep.taus(), sweep.values("I2"), MAT0, "heat",
                           eta=HEAT.eta)
    err_tau = abs(est_tau.d_hat - D_TRUE) / D_TRUE
    # time mode at horizons T and 2T (fixed dt)
    mesh1 = generate_benchmark_mesh(BENCH, 1, n_layers=5)
    taus = np.geomspace(4.0, 10.0, 13)
    dhats = {}
    errs = {}
    for T, steps in ((2.0, 512), (4.0, 1024)):
        tsol = solve_time_reflected(mesh1, MAT0, HEAT, T, steps, order=2)
        ti = TimeIndicator(tsol, HEAT, MAT0, mesh1, BENCH, PB, taus)
        I2 = np.array([p.I2 for p in ti.points()])
        est = fit_distance(taus, I2, MAT0, "heat", eta=HEAT.eta)
        dhats[T] = est.d_hat
        errs[T] = est.stderr
    gap = abs(dhats[2.0] - dhats[4.0])
    tol_gap = 0.05 * D_TRUE + errs[2.0] + errs[4.0]
    ok = err_tau <= 0.10 and gap <= tol_gap
    _report(7, ok, f"heat d_hat(tau mode) = {est_tau.d_hat:.4f} (err "
            f"{err_tau:.1%}, tol 10%); horizons T=2/T=4 give "
            f"{dhats[2.0]:.4f}/{dhats[4.0]:.4f}, gap {gap:.4f} <= {tol_gap:.4f}; "
            f"{time.time() - t0:.0f}s (limit 3600s)")


def test_criterion_08_decomposition_identities(benchmark_run):
    t0 = time.time()
    # (a) tau-mode residual across the acceptance sweep at level 2
    cols = _read_csv(benchmark_run["dir"] / "sweep_s1.csv")
    taus = cols["tau"].astype(float)
    res1 = cols["decomp_residual1"].astype(float)
    denom = cols["J"].astype(float) + cols["E"].astype(float) \
        + cols["e"].astype(float) / (MAT.theta0 * taus)
    rel2 = np.max(np.abs(res1) / denom)
    # decreasing under refinement: the same sweep at level 1
    mesh1 = generate_benchmark_mesh(BENCH, 1, n_layers=5)
    cfg1 = _bench_cfg(SHEAR, MAT, refinement=1)
    sweep1 = run_sweep_tau(mesh1, cfg1, SHEAR)
    taus1 = sweep1.taus()
    denom1 = sweep1.values("J") + sweep1.values("E") \
        + sweep1.values("e") / (MAT.theta0 * taus1)
    rel1 = np.max(np.abs(sweep1.values("decomp_residual1")) / denom1)
    # (b) time-mode combined identity spot check: 3 taus, T=4, 512 steps, level 1
    tsol = solve_time_reflected(mesh1, MAT, SHEAR, 4.0, 512, order=2)
    spot_taus = np.array([3.0, 4.0, 5.0])
    ti = TimeIndicator(tsol, SHEAR, MAT, mesh1, BENCH, PB, spot_taus)
    combined = []
    for pt in ti.points():
        lhs = MAT.theta0 * pt.tau * pt.I1 + pt.I2
        combined.append(abs(pt.decomp_residual_combined) / abs(lhs))
    comb = max(combined)
    ok = rel2 <= 0.02 and rel2 < rel1 and comb <= 0.03
    _report(8, ok, f"decomposition: tau-mode max residual {rel2:.2%} at level 2 "
            f"(tol 2%), {rel1:.2%} at level 1 (decreasing: {rel2 < rel1}); "
            f"time-mode combined residual {comb:.2%} (tol 3%); "
            f"{time.time() - t0:.0f}s")


def test_criterion_09_finite_horizon_threshold():
    t0 = time.time()
    mesh = generate_benchmark_mesh(BENCH, 1, n_layers=5)
    taus = np.geomspace(4.0, 10.0, 13)
    threshold = 2.0 * np.sqrt(MAT.rho / MAT.mu) * D_TRUE   # = 3.0
    verdicts = {}
    for factor, steps in ((0.8, 512), (1.25, 800)):
        T = factor * threshold
        tsol = solve_time_reflected(mesh, MAT, SHEAR, T, steps, order=2)
        ti = TimeIndicator(tsol, SHEAR, MAT, mesh, BENCH, PB, taus)
        I1 = np.array([p.I1 for p in ti.points()])
        verdict, _, _ = classify_threshold(taus, I1, T, MAT, "shear")
        verdicts[factor] = verdict
    ok = verdicts[0.8] == "decays" and verdicts[1.25] == "grows"
    _report(9, ok, f"threshold verdicts: T=0.8x2d -> {verdicts[0.8]} (want "
            f"decays), T=1.25x2d -> {verdicts[1.25]} (want grows); "
            f"{time.time() - t0:.0f}s (limit 7200s)")


def test_criterion_10_lemma_sweeps():
    t0 = time.time()
    wave = np.geomspace(2.0, 50.0, 14)
    heat = np.geomspace(2.0, 200.0, 14)
    x = np.array([0.65, 0.0, 0.0])
    shear_y = Probe("shear", (2.0, 0, 0), 0.2, direction=(0.0, 1.0, 0.0))
    cases = [
        ("L2.2-shear", dict(probe=shear_y, x=x, R=3.0), wave),
        ("L2.2-pressure", dict(probe=PRESS, x=x, R=3.0), wave),
        ("L2.3-heat", dict(probe=HEAT, x=x), heat),
        ("LA.1", dict(probe=shear_y, cavity=BENCH.cavity), wave),
        ("LA.2", dict(probe=HEAT, cavity=BENCH.cavity), wave),
        ("P2.5-iii", dict(probe=shear_y, cavity=BENCH.cavity), wave),
        ("P2.5-iv", dict(probe=PRESS, cavity=BENCH.cavity), wave),
        ("P2.5-v", dict(probe=HEAT, cavity=BENCH.cavity), heat),
    ]
    summary = []
    ok = True
    for lemma, kw, grid in cases:
        rows = bound_check_sweep(lemma, MAT, grid, **kw)
        r = np.array([row["ratio"] for row in rows if np.isfinite(row["ratio"])])
        good = bool(np.all(r > 0) and r.min() >= 0.1 * r[0])
        ok = ok and good
        summary.append(f"{lemma}:{'ok' if good else 'BAD'}")
    dt = time.time() - t0
    ok = ok and dt <= 300.0
    _report(10, ok, "lemma sweeps positive and bounded below "
            f"[{', '.join(summary)}] in {dt:.0f}s (limit 300s)")


def test_criterion_11_determinism(benchmark_run, tmp_path):
    t0 = time.time()
    run_experiment(benchmark_run["cfg"], tmp_path / "again")
    a = (benchmark_run["dir"] / "sweep_s1.csv").read_bytes()
    b = (tmp_path / "again" / "sweep_s1.csv").read_bytes()
    ok = a == b
    _report(11, ok, f"two runs of the criterion-5 config produce byte-identical "
            f"sweep CSVs ({len(a)} bytes) in {time.time() - t0:.0f}s")
