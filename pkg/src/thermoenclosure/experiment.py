"""Configuration-driven experiment runner and validation batteries.

One JSON config describes material, scene, probes, mode (tau sweep or
time-domain with a horizon), grids and mesh parameters; run_experiment
executes validate -> mesh -> solve sweep -> indicators -> distance fits ->
enclosure and writes reproducible artifacts:

    mesh.tetmesh             the generated mesh (plain ASCII format)
    sweep_<probe>.csv        per-tau indicator records
    estimates.csv            fitted distances per probe
    enclosure.vtk            0/1 exclusion grid (legacy VTK)
    manifest.json            full config echo + versions + timings

Identical config => byte-identical CSV content (solves are scheduled
concurrently but collected in grid order).
"""

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .bounds import LEMMA_IDS, bound_check_sweep
from .enclosure import FitError, enclose, fit_distance_sweep
from .geometry import Ball, Scene, generate_benchmark_mesh, save_mesh, set_distance
from .indicator import (IndicatorSweep, TimeIndicator, discrete_cavity_rule,
                        elastic_identity_check, indicator_point)
from .kernels import moment_scalar, moment_vector
from .oracles import (oracle_moment_scalar, oracle_moment_vector,
                      oracle_probe_tau)
from .probes import Material, Probe, TauProbeField
from .solver import SolverError, TauSolver, TimeSolver


class ValidationError(RuntimeError):
    pass


@dataclass
class ExperimentConfig:
    material: Material = field(default_factory=Material)
    scene: Scene = field(default_factory=lambda: Scene(Ball((0, 0, 0), 1.0)))
    probes: list = field(default_factory=list)
    mode: str = "tau"                  # "tau" | "time"
    horizon: float = 4.0               # time mode only
    n_steps: int = 512
    tau_min: float = 4.0
    tau_max: float = 10.0
    tau_count: int = 13
    tau_spacing: str = "geometric"     # or "linear"
    refinement: int = 2
    order: int = 2
    layer_factor: float = 2.0
    n_layers: int | None = None
    fit_window: tuple | None = None
    localized_M: float | None = None
    seed: int = 20260808
    workers: int = 1

    def taus(self):
        if self.tau_count < 5:
            raise ValidationError("tau grid needs at least 5 points")
        if not self.tau_min < self.tau_max:
            raise ValidationError("tau grid needs min < max")
        if self.tau_spacing == "geometric":
            return np.geomspace(self.tau_min, self.tau_max, self.tau_count)
        if self.tau_spacing == "linear":
            return np.linspace(self.tau_min, self.tau_max, self.tau_count)
        raise ValidationError(f"unknown tau spacing {self.tau_spacing!r}")

    def validate_geometry(self):
        for probe in self.probes:
            self.scene.validate_probe_ball(Ball(probe.center, probe.eta))

    def horizon_warning(self, probe):
        """Condition (T above the two-way travel bound) check; warning only."""
        if self.mode != "time" or self.scene.cavity is None:
            return ""
        d_cav, d_om = set_distance(self.scene, Ball(probe.center, probe.eta))
        slow = self.material.slowness(
            probe.kind if probe.kind != "heat" else "shear")
        if probe.kind == "heat":
            return ""   # no horizon restriction in the heat mode
        bound = slow * (2.0 * d_cav - d_om)
        if self.horizon <= bound:
            return (f"horizon T={self.horizon} is below the guaranteed-slope "
                    f"bound {bound:.4g} for probe '{probe.label or probe.kind}' "
                    "(threshold-side experiments are expected to do this)")
        return ""

    def to_json(self):
        d = {
            "material": asdict(self.material),
            "scene": {
                "outer": {"center": list(self.scene.outer.center),
                          "radius": self.scene.outer.radius},
                "cavity": None if self.scene.cavity is None else
                {"center": list(self.scene.cavity.center),
                 "radius": self.scene.cavity.radius},
            },
            "probes": [{"kind": p.kind, "center": list(p.center), "eta": p.eta,
                        "direction": None if p.direction is None else list(p.direction),
                        "label": p.label} for p in self.probes],
            "mode": self.mode, "horizon": self.horizon, "n_steps": self.n_steps,
            "tau_grid": {"min": self.tau_min, "max": self.tau_max,
                         "count": self.tau_count, "spacing": self.tau_spacing},
            "refinement": self.refinement, "order": self.order,
            "layer_factor": self.layer_factor, "n_layers": self.n_layers,
            "fit_window": None if self.fit_window is None else list(self.fit_window),
            "localized_M": self.localized_M,
            "seed": self.seed, "workers": self.workers,
        }
        return json.dumps(d, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        mat = Material(**d.get("material", {}))
        sc = d.get("scene", {})
        outer = Ball(tuple(sc["outer"]["center"]), sc["outer"]["radius"])
        cav = sc.get("cavity")
        scene = Scene(outer, None if cav is None else
                      Ball(tuple(cav["center"]), cav["radius"]))
        probes = [Probe(p["kind"], tuple(p["center"]), p["eta"],
                        direction=None if p.get("direction") is None
                        else tuple(p["direction"]),
                        label=p.get("label", ""))
                  for p in d.get("probes", [])]
        tg = d.get("tau_grid", {})
        return cls(material=mat, scene=scene, probes=probes,
                   mode=d.get("mode", "tau"),
                   horizon=d.get("horizon", 4.0), n_steps=d.get("n_steps", 512),
                   tau_min=tg.get("min", 4.0), tau_max=tg.get("max", 10.0),
                   tau_count=tg.get("count", 13),
                   tau_spacing=tg.get("spacing", "geometric"),
                   refinement=d.get("refinement", 2), order=d.get("order", 2),
                   layer_factor=d.get("layer_factor", 2.0),
                   n_layers=d.get("n_layers"),
                   fit_window=None if d.get("fit_window") is None
                   else tuple(d["fit_window"]),
                   localized_M=d.get("localized_M"),
                   seed=d.get("seed", 20260808), workers=d.get("workers", 1))


SWEEP_COLUMNS = ("tau", "I1", "I2", "Is", "Is_localized", "J", "j", "E", "e",
                 "decomp_residual1", "decomp_residual_combined", "solver_residual")
ESTIMATE_COLUMNS = ("probe_id", "mode", "alpha", "beta", "gamma", "d_hat",
                    "stderr", "n_used", "n_skipped")


def _fmt(v):
    if v is None:
        return "nan"
    return f"{v:.17g}"


def write_sweep_csv(path, sweep):
    lines = [",".join(SWEEP_COLUMNS)]
    for p in sweep.points:
        row = [p.tau, p.I1, p.I2, p.Is, p.Is_localized, p.J, p.j, p.E, p.e,
               p.decomp_residual1, p.decomp_residual_combined, p.solver_residual]
        lines.append(",".join(_fmt(v) for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_estimates_csv(path, estimates):
    lines = [",".join(ESTIMATE_COLUMNS)]
    for e in estimates:
        row = [e.probe_id, e.mode, _fmt(e.alpha), _fmt(e.beta), _fmt(e.gamma),
               _fmt(e.d_hat), _fmt(e.stderr), str(e.n_used), str(e.n_skipped)]
        lines.append(",".join(str(v) for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def run_sweep_tau(mesh, config, probe, blocks=None, workers=None):
    """Reflected-field tau sweep (total-field when the scene has no cavity)."""
    material = config.material
    solver = TauSolver(mesh, material, blocks=blocks, order=config.order)
    poly_rule = discrete_cavity_rule(solver.blocks)
    probe_ball = Ball(probe.center, probe.eta)
    taus = config.taus()
    reflected = config.scene.cavity is not None

    def one(tau):
        if reflected:
            sol = solver.solve(tau, solver.probe_loads_reflected(probe, tau),
                               kind="reflected")
        else:
            sol = solver.solve(tau, solver.probe_loads_total(probe, tau),
                               kind="total")
        return indicator_point(sol, probe, material, mesh, config.scene,
                               probe_ball, blocks=solver.blocks,
                               M=config.localized_M, poly_rule=poly_rule)

    n_workers = workers if workers is not None else config.workers
    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            points = list(pool.map(one, taus))
    else:
        points = [one(tau) for tau in taus]
    return IndicatorSweep(material, probe, "tau", points)


def run_sweep_time(mesh, config, probe, blocks=None):
    """One reflected time-domain run, Laplace-transformed over the tau grid."""
    from .solver import TimeSolver
    material = config.material
    solver = TimeSolver(mesh, material, config.horizon, config.n_steps,
                        blocks=blocks, order=config.order)
    tsol = solver.run(solver.probe_boundary_data(probe, reflected=True),
                      kind="reflected")
    probe_ball = Ball(probe.center, probe.eta)
    ti = TimeIndicator(tsol, probe, material, mesh, config.scene, probe_ball,
                       config.taus(), blocks=solver.blocks, M=config.localized_M)
    return IndicatorSweep(material, probe, "time", ti.points(),
                          horizon=config.horizon)


def run_experiment(config, out_dir, workers=None):
    """Full pipeline; returns a manifest dict (also written to disk)."""
    os.makedirs(out_dir, exist_ok=True)
    t_start = time.time()
    manifest = {"config": json.loads(config.to_json()),
                "version": __version__, "timings": {}, "warnings": [],
                "outputs": []}
    config.validate_geometry()
    for probe in config.probes:
        warn = config.horizon_warning(probe)
        if warn:
            manifest["warnings"].append(warn)

    t0 = time.time()
    mesh = generate_benchmark_mesh(config.scene, config.refinement,
                                   layer_factor=config.layer_factor,
                                   n_layers=config.n_layers)
    mesh_path = os.path.join(out_dir, "mesh.tetmesh")
    save_mesh(mesh, mesh_path)
    manifest["outputs"].append("mesh.tetmesh")
    manifest["timings"]["mesh"] = time.time() - t0

    estimates = []
    for probe in config.probes:
        label = probe.label or f"{probe.kind}"
        t0 = time.time()
        try:
            if config.mode == "tau":
                sweep = run_sweep_tau(mesh, config, probe, workers=workers)
            elif config.mode == "time":
                sweep = run_sweep_time(mesh, config, probe)
            else:
                raise ValidationError(f"unknown mode {config.mode!r}")
        except SolverError:
            raise
        path = os.path.join(out_dir, f"sweep_{label}.csv")
        write_sweep_csv(path, sweep)
        manifest["outputs"].append(os.path.basename(path))
        manifest["timings"][f"sweep_{label}"] = time.time() - t0
        if config.scene.cavity is not None:
            try:
                est = fit_distance_sweep(sweep, tau_window=config.fit_window)
                estimates.append(est)
            except FitError as exc:
                manifest["warnings"].append(f"fit failed for {label}: {exc}")

    est_path = os.path.join(out_dir, "estimates.csv")
    write_estimates_csv(est_path, estimates)
    manifest["outputs"].append("estimates.csv")

    if estimates:
        from .vtkio import write_structured_points_vtk
        R = config.scene.outer.radius * 1.05
        ctr = np.asarray(config.scene.outer.center)
        region = enclose(estimates, ctr - R, ctr + R, grid_n=48)
        vtk_path = os.path.join(out_dir, "enclosure.vtk")
        write_structured_points_vtk(vtk_path, region)
        manifest["outputs"].append("enclosure.vtk")

    manifest["timings"]["total"] = time.time() - t_start
    if not config.probes:
        manifest["warnings"].append("no probes configured; nothing to sweep")
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return manifest


# -- validation batteries ----------------------------------------------------

VALIDATION_COLUMNS = ("kind", "j", "tau", "eta", "dist", "closed_form",
                      "oracle", "rel_err")


def _random_admissible(rng, n):
    """Random (j, x, tau, eta) tuples with tau*eta in [0.01, 50]."""
    for _ in range(n):
        eta = rng.uniform(0.1, 1.0)
        s = np.exp(rng.uniform(np.log(0.01), np.log(50.0)))
        tau = s / eta
        d = rng.normal(size=3)
        d /= np.linalg.norm(d)
        dist = eta * rng.uniform(1.25, 4.0)
        yield tau, eta, d * dist


def validate_appendix(seed=20260808, n_cases=200, rtol=1e-8):
    """Closed forms vs brute-force quadrature on random admissible inputs.

    Cases are split between the scalar moments, the vector moments, and
    the three probe fields.  Returns (rows, failures).
    """
    rng = np.random.default_rng(seed)
    rows = []
    failures = []
    center = np.zeros(3)
    mat = Material(rho=1.0, mu=1.0, lam=1.0, m=0.5, c=1.0, k=1.0, theta0=1.0)

    def record(kind, j, tau, eta, dist, got, ref):
        scale = max(abs(ref), 1e-300)
        rel = abs(got - ref) / scale
        rows.append({"kind": kind, "j": j, "tau": tau, "eta": eta,
                     "dist": dist, "closed_form": got, "oracle": ref,
                     "rel_err": rel})
        if rel > rtol:
            failures.append(rows[-1])

    per_group = n_cases // 5
    for tau, eta, off in _random_admissible(rng, per_group * 2):
        j = int(rng.integers(0, 3))
        x = center + off
        got = moment_scalar(j, x, tau, center, eta)
        ref = oracle_moment_scalar(j, x, tau, center, eta)
        record("moment_scalar", j, tau, eta, np.linalg.norm(off), got, ref)
    for tau, eta, off in _random_admissible(rng, per_group):
        j = int(rng.integers(0, 2))
        x = center + off
        got = moment_vector(j, x, tau, center, eta)
        ref = oracle_moment_vector(j, x, tau, center, eta)
        n = np.linalg.norm
        record("moment_vector", j, tau, eta, n(off), float(n(got)), float(n(ref)))
    kinds = ("shear", "pressure", "heat")
    for i, (tau, eta, off) in enumerate(_random_admissible(rng, n_cases - 3 * per_group)):
        kind = kinds[i % 3]
        direction = None
        if kind == "shear":
            a = rng.normal(size=3)
            direction = tuple(a / np.linalg.norm(a))
        probe = Probe(kind, tuple(center), eta, direction=direction)
        x = center + off
        disp, temp = TauProbeField(probe, mat, tau).displacement(x[None, :])[0], \
            TauProbeField(probe, mat, tau).temperature(x[None, :])[0]
        dref, tref = oracle_probe_tau(probe, mat, x, tau)
        if kind == "heat":
            record(f"probe_{kind}", -1, tau, eta, np.linalg.norm(off),
                   float(temp), float(tref))
        else:
            n = np.linalg.norm
            record(f"probe_{kind}", -1, tau, eta, n(off), float(n(disp)),
                   float(n(dref)))
    return rows, failures


def validate_identity_battery(seed=20260808, n_matrices=1000, n_moduli=20):
    """(2.12)-style identity and the Sym bound on random matrices/moduli."""
    rng = np.random.default_rng(seed)
    bad = 0
    pairs = []
    for _ in range(n_moduli):
        mu = rng.uniform(0.1, 10.0)
        lam = rng.uniform(-2.0 * mu / 3.0 + 0.05, 10.0)
        pairs.append((lam, mu))
    for i in range(n_matrices):
        lam, mu = pairs[i % n_moduli]
        A = rng.normal(size=(3, 3)) * rng.uniform(0.1, 10.0)
        _, _, ok = elastic_identity_check(A, lam, mu)
        bad += not ok
    return bad


def write_validation_csv(path, rows):
    lines = [",".join(VALIDATION_COLUMNS)]
    for r in rows:
        lines.append(",".join(
            [str(r["kind"]), str(r["j"])]
            + [_fmt(r[k]) for k in ("tau", "eta", "dist", "closed_form",
                                    "oracle", "rel_err")]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def validate(config, level="quick", out_path=None):
    """Validation battery; returns a report dict; raises nothing itself.

    quick: closed-form-vs-oracle suite + identity battery.
    full: additionally every lemma bound sweep on the configured scene.
    """
    report = {"ok": True, "failures": []}
    config.validate_geometry()
    rows, failures = validate_appendix(seed=config.seed)
    report["oracle_cases"] = len(rows)
    report["oracle_failures"] = len(failures)
    if failures:
        report["ok"] = False
        report["failures"].extend(
            f"oracle mismatch: {f['kind']} j={f['j']} tau={f['tau']:.4g} "
            f"eta={f['eta']:.4g} rel_err={f['rel_err']:.3e}" for f in failures)
    bad = validate_identity_battery(seed=config.seed)
    report["identity_failures"] = bad
    if bad:
        report["ok"] = False
        report["failures"].append(f"{bad} identity-battery violations")
    if out_path is not None:
        write_validation_csv(out_path, rows)
    if level == "full" and config.scene.cavity is not None and config.probes:
        taus_wave = np.geomspace(2.0, 50.0, 12)
        taus_heat = np.geomspace(2.0, 200.0, 12)
        shear = next((p for p in config.probes if p.kind == "shear"), None)
        mat = config.material
        cav = config.scene.cavity
        sweeps = {}
        for lemma in LEMMA_IDS:
            kind = ("heat" if "heat" in lemma or lemma == "P2.5-v" else
                    "pressure" if "pressure" in lemma or lemma == "P2.5-iv" else
                    "shear")
            probe = next((p for p in config.probes if p.kind == kind), None)
            if probe is None:
                base = shear or config.probes[0]
                direction = (0.0, 0.0, 1.0) if kind == "shear" else None
                probe = Probe(kind, base.center, base.eta, direction=direction)
            taus = taus_heat if kind == "heat" else taus_wave
            x = 0.5 * (cav.c + cav.radius * _unit(probe.p - cav.c)
                       + config.scene.outer.c
                       + config.scene.outer.radius * _unit(probe.p - config.scene.outer.c))
            rows_ = bound_check_sweep(lemma, mat, taus, probe=probe, x=x,
                                      R=np.linalg.norm(x - probe.p) + 1.0,
                                      cavity=cav)
            ratios = np.array([r["ratio"] for r in rows_ if np.isfinite(r["ratio"])])
            ok = bool(np.all(ratios > 0)
                      and ratios.min() >= 0.1 * ratios[0] - 1e-300)
            sweeps[lemma] = {"ok": ok, "min_ratio": float(ratios.min()),
                             "ratio_at_tau0": float(ratios[0])}
            if not ok:
                report["ok"] = False
                report["failures"].append(f"bound sweep {lemma} not positive-bounded")
        report["bound_sweeps"] = sweeps
    return report


def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)
