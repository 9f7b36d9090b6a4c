"""Enclosure-method cavity detection in a linear thermoelastic body.

Pipeline: closed-form probe fields -> coupled forward solver on a
tetrahedral shell mesh -> indicator functionals of the boundary data ->
logarithmic-asymptotics fit of the probe-to-cavity distance -> sphere
intersection enclosure of the cavity.
"""

__version__ = "0.1.0"

from .probes import (Material, Probe, TauProbeField, TimeProbeField,
                     probe_field_tau, probe_field_time, probe_traction_flux)
from .kernels import moment_scalar, moment_vector, phi0, phi1, phi2, psi0, psi1, psi2
from .geometry import Ball, Scene, Mesh, generate_benchmark_mesh, set_distance, \
    boundary_patch, save_mesh, load_mesh
from .solver import FemBlocks, TauSolver, TimeSolver, solve_tau, \
    solve_tau_reflected, solve_time, solve_time_reflected, laplace_trace
from .indicator import IndicatorPoint, IndicatorSweep, TimeIndicator, \
    indicator_point, indicator_localized, elastic_identity_check
from .enclosure import DistanceEstimate, EnclosureRegion, FitError, \
    fit_distance, fit_distance_sweep, classify_threshold, enclose
from .bounds import bound_check_sweep
from .experiment import ExperimentConfig, run_experiment, validate
