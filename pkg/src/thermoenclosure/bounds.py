"""Numerical sweeps of the lemma-level lower bounds.

Each sweep evaluates the ratio LHS/RHS of a pointwise or volume lower
bound with its generic constant removed, over a tau grid.  A bound of the
form  quantity >= C * tau^(-p) * exp(-rate * (geometry))  turns into the
ratio  quantity * tau^p * exp(+rate * (geometry)),  evaluated with the
exponential factored analytically (nothing overflows at large tau).  The
checks assert positivity and boundedness below, not constant values: the
papers' generic constants are existential.

Lemma ids:
  L2.2-shear, L2.2-pressure : pointwise probe-field lower bounds at x
  L2.3-heat                 : pointwise heat-probe lower bound at x
  LA.1, LA.2                : volume integrals over the cavity ball
  P2.5-iii, P2.5-iv, P2.5-v : cavity energies J (wave) and j (heat)
"""

import numpy as np

from .probes import Probe, TauProbeField
from .quadrature import ball_rule

LEMMA_IDS = ("L2.2-shear", "L2.2-pressure", "L2.3-heat",
             "LA.1", "LA.2", "P2.5-iii", "P2.5-iv", "P2.5-v")

TRIVIAL = float("inf")


def _cavity_rule(cavity, probe_center, n_radial=12, n_polar=48):
    axis = np.asarray(probe_center, dtype=float) - cavity.c
    return ball_rule(cavity.c, cavity.radius, n_radial=n_radial,
                     n_polar=n_polar, n_azimuth=2 * n_polar, axis=axis)


def _energy_density_scaled(f, pts, mat, tau, dist):
    """Energy density of the probe field scaled by exp(+rate*dist)."""
    if f.probe.kind == "heat":
        g = f.grad_temperature(pts, decay_shift=dist)
        th = f.temperature(pts, decay_shift=dist)
        return mat.k * np.sum(g * g, axis=1) + mat.c * tau * th * th
    J = f.jacobian(pts, decay_shift=dist)
    w = f.displacement(pts, decay_shift=dist)
    sym = 0.5 * (J + np.swapaxes(J, 1, 2))
    tr = np.trace(J, axis1=1, axis2=2)
    dev = sym - tr[:, None, None] / 3.0 * np.eye(3)
    return (2.0 * mat.mu * np.sum(dev * dev, axis=(1, 2))
            + (3.0 * mat.lam + 2.0 * mat.mu) / 3.0 * tr * tr
            + mat.rho * tau ** 2 * np.sum(w * w, axis=1))


def bound_check_sweep(lemma_id, material, tau_grid, probe=None, x=None, R=None,
                      cavity=None):
    """Sweep the bound ratio of one lemma over tau_grid.

    probe: Probe for the field-based bounds (kind must match the lemma).
    x: evaluation point for the pointwise bounds (L2.2, L2.3); R: the
    radius constraint of Lemma 2.2.  cavity: Ball for the volume bounds.
    Returns a list of dicts with keys tau, ratio, flag.
    """
    if lemma_id not in LEMMA_IDS:
        raise ValueError(f"unknown lemma id {lemma_id!r}")
    mat = material
    rows = []

    if lemma_id.startswith("L2.2") or lemma_id == "L2.3-heat":
        kind = {"L2.2-shear": "shear", "L2.2-pressure": "pressure",
                "L2.3-heat": "heat"}[lemma_id]
        if probe is None or probe.kind != kind:
            raise ValueError(f"{lemma_id} needs a {kind} probe")
        x = np.asarray(x, dtype=float)
        xi = np.linalg.norm(x - probe.p)
        if lemma_id.startswith("L2.2"):
            if R is None or R <= probe.eta:
                raise ValueError("Lemma 2.2 needs R > eta")
            if xi > R:
                raise ValueError("Lemma 2.2 requires |x - p| <= R")
        for tau in tau_grid:
            f = TauProbeField(probe, mat, tau)
            if kind == "shear":
                omega = (x - probe.p) / xi
                denom = np.linalg.norm(np.cross(omega, probe.a))
                if denom < 1e-12:
                    rows.append({"tau": tau, "ratio": TRIVIAL, "flag": "trivial"})
                    continue
                val = np.linalg.norm(f.displacement(x[None, :], scaled=True)[0])
                ratio = val * tau / denom
            elif kind == "pressure":
                val = np.linalg.norm(f.displacement(x[None, :], scaled=True)[0])
                ratio = val * tau
            else:
                val = f.temperature(x[None, :], scaled=True)[0]
                ratio = val * tau ** 1.5 * xi
            rows.append({"tau": tau, "ratio": float(ratio), "flag": ""})
        return rows

    if cavity is None:
        raise ValueError(f"{lemma_id} needs the cavity ball")
    if lemma_id in ("LA.1", "LA.2"):
        center = np.asarray(probe.center if probe is not None else x, dtype=float)
        eta = probe.eta if probe is not None else 0.0
    else:
        if probe is None:
            raise ValueError(f"{lemma_id} needs a probe")
        center = probe.p
        eta = probe.eta
    dist = np.linalg.norm(cavity.c - center) - cavity.radius - eta
    if dist <= 0:
        raise ValueError("probe ball must be disjoint from the cavity")
    pts, w = _cavity_rule(cavity, center)
    xi = np.linalg.norm(pts - center[None, :], axis=1)

    if lemma_id == "LA.1":
        if probe is None or probe.kind != "shear":
            raise ValueError("Lemma A.1 needs the shear probe (direction a)")
        near = cavity.c + cavity.radius * (center - cavity.c) \
            / np.linalg.norm(center - cavity.c)
        omega0 = (near - center) / np.linalg.norm(near - center)
        kappa = 2 if np.linalg.norm(np.cross(omega0, probe.a)) > 0.1 else 3
        omega = (pts - center[None, :]) / xi[:, None]
        cross2 = np.sum(np.cross(omega, probe.a[None, :]) ** 2, axis=1)
        slow = mat.slowness("shear")
        for tau in tau_grid:
            rate = tau * slow
            integ = np.sum(w * np.exp(-2.0 * rate * (xi - eta - dist)) * cross2)
            rows.append({"tau": tau, "ratio": float(tau ** kappa * integ),
                         "flag": f"kappa={kappa}"})
        return rows

    if lemma_id == "LA.2":
        for tau in tau_grid:
            integ = np.sum(w * np.exp(-2.0 * tau * (xi - eta - dist)))
            rows.append({"tau": tau, "ratio": float(tau ** 2 * integ), "flag": ""})
        return rows

    kind, power = {"P2.5-iii": ("shear", 3), "P2.5-iv": ("pressure", 2),
                   "P2.5-v": ("heat", 4)}[lemma_id]
    if probe.kind != kind:
        raise ValueError(f"{lemma_id} needs a {kind} probe")
    for tau in tau_grid:
        f = TauProbeField(probe, mat, tau)
        dens = _energy_density_scaled(f, pts, mat, tau, dist)
        rows.append({"tau": tau, "ratio": float(tau ** power * np.sum(w * dens)),
                     "flag": ""})
    return rows
