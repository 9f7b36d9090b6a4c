"""Independent brute-force evaluations used to validate the closed forms.

Nothing here is used by the production pipeline; the validation command
and the test suite call these to check every closed-form path against a
direct quadrature of its defining integral.
"""

import numpy as np

from .probes import TauProbeField, TimeProbeField
from .quadrature import ball_rule


class OracleConvergenceWarning(RuntimeError):
    """Raised when two successive refinement levels fail to agree."""

    def __init__(self, achieved, message="oracle did not reach the requested agreement"):
        super().__init__(f"{message} (achieved {achieved:.3e})")
        self.achieved = achieved


def _yukawa_ball_integral(density, x, tau, center, eta, n):
    axis = np.asarray(x, dtype=float) - np.asarray(center, dtype=float)
    pts, w = ball_rule(center, eta, n_radial=n, n_polar=n, n_azimuth=n, axis=axis)
    d = np.asarray(x, dtype=float)[None, :] - pts
    r = np.linalg.norm(d, axis=1)
    ker = np.exp(-tau * r) / r
    dens = density(pts)
    if dens.ndim == 2:
        return np.einsum("n,ni->i", w * ker, dens)
    return float(np.sum(w * ker * dens))


def _converged(fn, levels=(16, 24, 34, 48, 68), rtol=1e-10, atol=0.0):
    """Run fn(n) over refinement levels until two agree to rtol.

    atol > 0 additionally accepts agreement in absolute terms; only for
    quantities that are exactly zero up to quadrature noise (e.g. fields
    evaluated on a symmetry axis), where the relative test cannot close."""
    prev = fn(levels[0])
    achieved = np.inf
    for n in levels[1:]:
        cur = fn(n)
        scale = np.max(np.abs(cur)) + 1e-300
        achieved = np.max(np.abs(cur - prev))
        if achieved <= max(rtol * scale, atol):
            return cur, achieved / scale
        prev = cur
    raise OracleConvergenceWarning(achieved)


def oracle_moment_scalar(j, x, tau, center, eta, rtol=1e-10, atol=0.0):
    """Direct quadrature of int_B e^{-tau|x-y|}/|x-y| |y-p|^j dy."""
    p = np.asarray(center, dtype=float)

    def density(pts):
        return np.linalg.norm(pts - p[None, :], axis=1) ** j

    val, _ = _converged(lambda n: _yukawa_ball_integral(density, x, tau, center, eta, n),
                        rtol=rtol, atol=atol)
    return val


def oracle_moment_vector(j, x, tau, center, eta, rtol=1e-10, atol=0.0):
    """Direct quadrature of the vector moments (densities omega and (y-p))."""
    p = np.asarray(center, dtype=float)

    def density(pts):
        d = pts - p[None, :]
        r = np.linalg.norm(d, axis=1, keepdims=True)
        return d / r * r ** j

    val, _ = _converged(lambda n: _yukawa_ball_integral(density, x, tau, center, eta, n),
                        rtol=rtol, atol=atol)
    return val


def oracle_probe_tau(probe, material, x, tau, rtol=1e-10, atol=0.0):
    """Ball quadrature of the defining integral of the tau-domain probe field.

    Returns (displacement, temperature) to compare against TauProbeField.
    The integrands are the Green function of the mode's modified-Helmholtz
    operator against the exact initial data, so this is a fully independent
    route to the same field.
    """
    f = TauProbeField(probe, material, tau)
    p = probe.p
    eta = probe.eta
    mat = material

    if probe.kind == "heat":
        def density(pts):
            r = np.linalg.norm(pts - p[None, :], axis=1)
            return (eta - r) ** 2

        val, _ = _converged(
            lambda n: _yukawa_ball_integral(density, x, f.rate, p, eta, n),
            rtol=rtol, atol=atol)
        return np.zeros(3), mat.c / (4.0 * np.pi * mat.k) * val

    def density(pts):
        d = pts - p[None, :]
        r = np.linalg.norm(d, axis=1, keepdims=True)
        v = -2.0 * (eta - r) * d / r          # grad of (eta-r)^2, sign flipped
        if probe.kind == "shear":
            return np.cross(v, probe.a[None, :])
        return v

    val, _ = _converged(
        lambda n: _yukawa_ball_integral(density, x, f.rate, p, eta, n),
        rtol=rtol, atol=atol)
    modulus = mat.mu if probe.kind == "shear" else mat.lam + 2.0 * mat.mu
    return mat.rho / (4.0 * np.pi * modulus) * val, 0.0


def oracle_heat_time(probe, material, x, t, n=60):
    """3D Gaussian-convolution quadrature for the time-domain heat probe."""
    kappa = material.diffusivity
    p = probe.p
    axis = np.asarray(x, dtype=float) - p
    pts, w = ball_rule(p, probe.eta, n_radial=n, n_polar=n, n_azimuth=n, axis=axis)
    r = np.linalg.norm(pts - p[None, :], axis=1)
    g = (probe.eta - r) ** 2
    d2 = np.sum((np.asarray(x, dtype=float)[None, :] - pts) ** 2, axis=1)
    ker = np.exp(-d2 / (4.0 * kappa * t)) / (4.0 * np.pi * kappa * t) ** 1.5
    return float(np.sum(w * g * ker))


def oracle_laplace_of_time_probe(probe, material, x, tau):
    """Numeric int_0^inf e^{-tau t} (v, Theta)(x, t) dt via Gauss panels.

    For wave probes the support in t is compact and the panels are aligned
    with the characteristic kink times; for the heat probe the panels are
    geometrically graded toward t=0 and truncated where e^{-tau t} is
    negligible.
    """
    f = TimeProbeField(probe, material)
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x - probe.p)
    if probe.kind in ("shear", "pressure"):
        c = material.shear_speed if probe.kind == "shear" else material.pressure_speed
        kinks = sorted({(r - probe.eta) / c, r / c, (r + probe.eta) / c})
        edges = [0.0] + [t for t in kinks if t > 0.0]
        # refine each smooth piece a bit
        refined = []
        for lo, hi in zip(edges[:-1], edges[1:]):
            refined.extend(np.linspace(lo, hi, 5)[:-1])
        refined.append(edges[-1])
        edges = refined
    else:
        t_hi = 42.0 / tau
        edges = np.concatenate([[0.0], t_hi * np.geomspace(1e-5, 1.0, 40)])
    gl, wl = np.polynomial.legendre.leggauss(24)
    disp = np.zeros(3)
    temp = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        ts = 0.5 * (hi - lo) * (gl + 1.0) + lo
        ws = 0.5 * (hi - lo) * wl
        for tk, wk in zip(ts, ws):
            e = wk * np.exp(-tau * tk)
            disp += e * f.displacement(x[None, :], tk)[0]
            temp += e * f.temperature(x[None, :], tk)[0]
    return disp, temp


def fd_jacobian(field, x, h=None, richardson=True):
    """4th-order central-difference Jacobian with optional Richardson step.

    field maps (N,3) -> (N,) or (N,3); x is (N,3).  Returns (N,3) for
    scalar fields (the gradient) or (N,3,3) with J[n,i,j] = d f_i/dx_j.
    Step defaults to max(1e-5, 1e-4 |x|) per point.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = len(x)
    if h is None:
        h = np.maximum(1e-5, 1e-4 * np.linalg.norm(x, axis=1))
    else:
        h = np.full(n, float(h))

    def d4(step):
        cols = []
        for j in range(3):
            e = np.zeros(3)
            e[j] = 1.0
            pts = np.concatenate([
                x - 2.0 * step[:, None] * e, x - step[:, None] * e,
                x + step[:, None] * e, x + 2.0 * step[:, None] * e])
            v = np.asarray(field(pts))
            vm2, vm1, vp1, vp2 = v[:n], v[n:2 * n], v[2 * n:3 * n], v[3 * n:]
            cols.append((vm2 - 8.0 * vm1 + 8.0 * vp1 - vp2) / (12.0 * step[:, None] if v.ndim == 2 else 12.0 * step))
        return np.stack(cols, axis=-1)

    J = d4(h)
    if richardson:
        J2 = d4(h / 2.0)
        J = J2 + (J2 - J) / 15.0
    return J


def fd_laplacian(field, x, h=1e-4):
    """2nd-order FD Laplacian of a scalar or vector field, for PDE residuals."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = len(x)
    out = None
    f0 = np.asarray(field(x))
    for j in range(3):
        e = np.zeros(3)
        e[j] = 1.0
        vp = np.asarray(field(x + h * e))
        vm = np.asarray(field(x - h * e))
        term = (vp - 2.0 * f0 + vm) / h ** 2
        out = term if out is None else out + term
    return out
