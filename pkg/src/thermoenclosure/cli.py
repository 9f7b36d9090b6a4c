"""Command-line entry points for the experiment pipeline.

Subcommands: validate-appendix, mesh, solve, sweep, extract, enclose, run.
Exit codes: 0 success, 2 validation failure, 3 solver failure,
4 extraction failure.
"""

import argparse
import json
import os
import sys

import numpy as np

from .enclosure import FitError, enclose, fit_distance
from .experiment import (ExperimentConfig, ValidationError, run_experiment,
                         run_sweep_tau, run_sweep_time, validate,
                         write_estimates_csv, write_sweep_csv, SWEEP_COLUMNS)
from .geometry import Ball, generate_benchmark_mesh, save_mesh
from .indicator import indicator_point
from .solver import SolverError, TauSolver
from .vtkio import write_structured_points_vtk, write_unstructured_vtk

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SOLVER = 3
EXIT_EXTRACTION = 4


def _load_config(path):
    with open(path) as fh:
        return ExperimentConfig.from_json(fh.read())


def _cmd_validate(args):
    config = _load_config(args.config) if args.config else ExperimentConfig(
        probes=[])
    out_csv = os.path.join(args.out, "validation.csv")
    os.makedirs(args.out, exist_ok=True)
    report = validate(config, level=args.level, out_path=out_csv)
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK if report["ok"] else EXIT_VALIDATION


def _cmd_mesh(args):
    config = _load_config(args.config)
    level = args.refine if args.refine is not None else config.refinement
    mesh = generate_benchmark_mesh(config.scene, level,
                                   layer_factor=config.layer_factor,
                                   n_layers=config.n_layers)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "mesh.tetmesh")
    save_mesh(mesh, path)
    print(f"wrote {path}: {mesh.n_nodes} nodes, {len(mesh.tets)} tets, "
          f"{len(mesh.boundary_facets)} boundary facets")
    return EXIT_OK


def _cmd_solve(args):
    config = _load_config(args.config)
    level = args.refine if args.refine is not None else config.refinement
    mesh = generate_benchmark_mesh(config.scene, level,
                                   layer_factor=config.layer_factor,
                                   n_layers=config.n_layers)
    probe = config.probes[0]
    tau = args.tau
    solver = TauSolver(mesh, config.material, order=config.order)
    if config.scene.cavity is not None:
        sol = solver.solve(tau, solver.probe_loads_reflected(probe, tau),
                           kind="reflected")
    else:
        sol = solver.solve(tau, solver.probe_loads_total(probe, tau))
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, f"solution_tau{tau:g}.vtk")
    n = mesh.n_nodes
    write_unstructured_vtk(path, mesh, point_vectors={"w": sol.w[:n]},
                           point_scalars={"Xi": sol.xi[:n]})
    print(f"wrote {path} (kind={sol.kind}, residual={sol.stats['residual']:.2e})")
    return EXIT_OK


def _cmd_sweep(args):
    config = _load_config(args.config)
    if args.refine is not None:
        config.refinement = args.refine
    config.validate_geometry()
    mesh = generate_benchmark_mesh(config.scene, config.refinement,
                                   layer_factor=config.layer_factor,
                                   n_layers=config.n_layers)
    os.makedirs(args.out, exist_ok=True)
    for probe in config.probes:
        label = probe.label or probe.kind
        if config.mode == "tau":
            sweep = run_sweep_tau(mesh, config, probe, workers=args.workers)
        else:
            sweep = run_sweep_time(mesh, config, probe)
        path = os.path.join(args.out, f"sweep_{label}.csv")
        write_sweep_csv(path, sweep)
        print(f"wrote {path}")
    return EXIT_OK


def _cmd_extract(args):
    config = _load_config(args.config)
    estimates = []
    for probe in config.probes:
        label = probe.label or probe.kind
        path = os.path.join(args.out, f"sweep_{label}.csv")
        taus, vals = _read_sweep_column(path, "I2" if probe.kind == "heat" else "I1")
        est = fit_distance(taus, vals, config.material, probe.kind,
                           eta=probe.eta, probe_id=label,
                           tau_window=config.fit_window, center=probe.center)
        estimates.append(est)
    out = os.path.join(args.out, "estimates.csv")
    write_estimates_csv(out, estimates)
    for e in estimates:
        print(f"{e.probe_id}: d_hat = {e.d_hat:.6g} +- {e.stderr:.2g} "
              f"({e.n_used} pts, {e.n_skipped} skipped)")
    return EXIT_OK


def _cmd_enclose(args):
    config = _load_config(args.config)
    path = os.path.join(args.out, "estimates.csv")
    with open(path) as fh:
        lines = [ln.strip().split(",") for ln in fh if ln.strip()]
    header = lines[0]
    by = {name: header.index(name) for name in header}
    estimates = []
    from .enclosure import DistanceEstimate
    probe_by_label = {p.label or p.kind: p for p in config.probes}
    for row in lines[1:]:
        label = row[by["probe_id"]]
        probe = probe_by_label[label]
        estimates.append(DistanceEstimate(
            label, row[by["mode"]], float(row[by["alpha"]]),
            float(row[by["beta"]]), float(row[by["gamma"]]),
            float(row[by["d_hat"]]), float(row[by["stderr"]]),
            int(row[by["n_used"]]), int(row[by["n_skipped"]]), (0, 0),
            center=probe.center, eta=probe.eta))
    R = config.scene.outer.radius * 1.05
    ctr = np.asarray(config.scene.outer.center)
    region = enclose(estimates, ctr - R, ctr + R, grid_n=args.grid)
    out = os.path.join(args.out, "enclosure.vtk")
    write_structured_points_vtk(out, region)
    print(f"wrote {out}")
    return EXIT_OK


def _cmd_run(args):
    config = _load_config(args.config)
    if args.refine is not None:
        config.refinement = args.refine
    manifest = run_experiment(config, args.out, workers=args.workers)
    for warning in manifest["warnings"]:
        print(f"warning: {warning}")
    print(f"run complete in {manifest['timings']['total']:.1f}s; "
          f"outputs in {args.out}: {', '.join(manifest['outputs'])}")
    return EXIT_OK


def _read_sweep_column(path, column):
    with open(path) as fh:
        lines = [ln.strip().split(",") for ln in fh if ln.strip()]
    header = lines[0]
    jt = header.index("tau")
    jc = header.index(column)
    taus = np.array([float(r[jt]) for r in lines[1:]])
    vals = np.array([float(r[jc]) for r in lines[1:]])
    return taus, vals


def main(argv=None):
    ap = argparse.ArgumentParser(
        prog="thermoenclosure",
        description="Enclosure-method cavity detection in a thermoelastic body")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required,
                       help="experiment config JSON")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--refine", type=int, default=None,
                       help="override the refinement level")

    p = sub.add_parser("validate-appendix",
                       help="closed forms vs quadrature oracle + identity battery")
    common(p, config_required=False)
    p.add_argument("--level", choices=("quick", "full"), default="quick")
    p.set_defaults(fn=_cmd_validate)

    p = sub.add_parser("mesh", help="generate and save the benchmark mesh")
    common(p)
    p.set_defaults(fn=_cmd_mesh)

    p = sub.add_parser("solve", help="single forward solve + VTK dump")
    common(p)
    p.add_argument("--tau", type=float, default=4.0)
    p.set_defaults(fn=_cmd_solve)

    p = sub.add_parser("sweep", help="indicator sweep CSVs for all probes")
    common(p)
    p.set_defaults(fn=_cmd_sweep)

    p = sub.add_parser("extract", help="distance fits from existing sweep CSVs")
    common(p)
    p.set_defaults(fn=_cmd_extract)

    p = sub.add_parser("enclose", help="exclusion region from estimates.csv")
    common(p)
    p.add_argument("--grid", type=int, default=48)
    p.set_defaults(fn=_cmd_enclose)

    p = sub.add_parser("run", help="full pipeline")
    common(p)
    p.set_defaults(fn=_cmd_run)

    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except (ValidationError, ValueError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except FitError as exc:
        print(f"extraction error: {exc}", file=sys.stderr)
        return EXIT_EXTRACTION


if __name__ == "__main__":
    sys.exit(main())
