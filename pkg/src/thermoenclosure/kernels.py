"""Closed-form kernels for the ball moment integrals.

Everything here reduces to six radial kernels built from cosh/sinh.  With
s = tau*eta (tau the modified-Helmholtz decay rate, eta the ball radius):

    phi0(s) = s cosh s - sinh s                    = int_0^s u sinh u du
    phi1(s) = (s^2+2) cosh s - 2 s sinh s - 2      = int_0^s u^2 sinh u du
    phi2(s) = s (s^2+6) cosh s - 3 (s^2+2) sinh s  = int_0^s u^3 sinh u du
    psi0(s) = s sinh s - 2 cosh s + 2
    psi1(s) = (s^2+3) sinh s - 3 s cosh s
    psi2(s) = s cosh s - 3 sinh s + 2 s            ( = s*psi0 - psi1 )

The scalar moments of exp(-tau|x-y|)/|x-y| over the ball B(p, eta), with
xi = |x - p| > eta, are

    I_j(x; tau) = 4 pi phi_j(tau eta) / tau^(3+j) * exp(-tau xi)/xi,

and the vector moments (densities (y-p)/|y-p| and (y-p)) are

    Ivec_j(x; tau) = 4 pi / tau^(3+j) * (xi + 1/tau)/xi^2
                     * psi_j(tau eta) * exp(-tau xi) * (x-p)/xi.

All kernels have all-positive Taylor series, used below for small s where
the cosh/sinh combinations cancel catastrophically.  For large s the
scaled variants kernel(s)*exp(-s) are evaluated in exponential-factored
form so that nothing overflows for any s (tau*eta up to and beyond 700).
"""

import numpy as np

import math

_SERIES_SWITCH = 2.0
_SERIES_TERMS = 26
_FACT = [float(math.factorial(n)) for n in range(2 * _SERIES_TERMS + 8)]


def _phi0_series(s):
    # phi0 = sum_{k>=0} s^{2k+3} (2k+2) / (2k+3)!
    out = np.zeros_like(s)
    for k in range(_SERIES_TERMS):
        out += (2 * k + 2) / _FACT[2 * k + 3] * s ** (2 * k + 3)
    return out


def _phi1_series(s):
    # phi1 = sum_{k>=0} s^{2k+4} / ((2k+4) (2k+1)!)
    out = np.zeros_like(s)
    for k in range(_SERIES_TERMS):
        out += 1.0 / ((2 * k + 4) * _FACT[2 * k + 1]) * s ** (2 * k + 4)
    return out


def _phi2_series(s):
    # phi2 = sum_{k>=0} s^{2k+5} / ((2k+5) (2k+1)!)
    out = np.zeros_like(s)
    for k in range(_SERIES_TERMS):
        out += 1.0 / ((2 * k + 5) * _FACT[2 * k + 1]) * s ** (2 * k + 5)
    return out


def _psi0_series(s):
    # psi0 = sum_{k>=1} 2k s^{2k+2} / (2k+2)!
    out = np.zeros_like(s)
    for k in range(1, _SERIES_TERMS):
        out += 2 * k / _FACT[2 * k + 2] * s ** (2 * k + 2)
    return out


def _psi1_series(s):
    # psi1 = sum_{k>=2} 4k(k-1) s^{2k+1} / (2k+1)!
    out = np.zeros_like(s)
    for k in range(2, _SERIES_TERMS):
        out += 4 * k * (k - 1) / _FACT[2 * k + 1] * s ** (2 * k + 1)
    return out


def _psi2_series(s):
    # psi2 = sum_{k>=2} (2k-2) s^{2k+1} / (2k+1)!
    out = np.zeros_like(s)
    for k in range(2, _SERIES_TERMS):
        out += (2 * k - 2) / _FACT[2 * k + 1] * s ** (2 * k + 1)
    return out


def _dispatch(s, closed, series, scaled):
    """Evaluate kernel(s) (scaled=False) or kernel(s)*exp(-s) (scaled=True).

    Series branch below s=2 avoids the cosh/sinh cancellation; the closed
    branch is written purely in terms of exp(-s) and exp(-2s) when scaled.
    """
    s = np.asarray(s, dtype=float)
    scalar_in = s.ndim == 0
    s = np.atleast_1d(s)
    out = np.empty_like(s)
    small = s < _SERIES_SWITCH
    if small.any():
        v = series(s[small])
        out[small] = v * np.exp(-s[small]) if scaled else v
    big = ~small
    if big.any():
        out[big] = closed(s[big], scaled)
    return out[0] if scalar_in else out


def _phi0_closed(s, scaled):
    if scaled:
        e2 = np.exp(-2.0 * s)
        return 0.5 * (s * (1.0 + e2) - (1.0 - e2))
    return s * np.cosh(s) - np.sinh(s)


def _phi1_closed(s, scaled):
    if scaled:
        e2 = np.exp(-2.0 * s)
        return 0.5 * ((s * s + 2.0) * (1.0 + e2) - 2.0 * s * (1.0 - e2)) - 2.0 * np.exp(-s)
    return (s * s + 2.0) * np.cosh(s) - 2.0 * s * np.sinh(s) - 2.0


def _phi2_closed(s, scaled):
    if scaled:
        e2 = np.exp(-2.0 * s)
        return 0.5 * (s * (s * s + 6.0) * (1.0 + e2) - 3.0 * (s * s + 2.0) * (1.0 - e2))
    return s * (s * s + 6.0) * np.cosh(s) - 3.0 * (s * s + 2.0) * np.sinh(s)


def _psi0_closed(s, scaled):
    if scaled:
        e2 = np.exp(-2.0 * s)
        return 0.5 * (s * (1.0 - e2) - 2.0 * (1.0 + e2)) + 2.0 * np.exp(-s)
    return s * np.sinh(s) - 2.0 * np.cosh(s) + 2.0


def _psi1_closed(s, scaled):
    if scaled:
        e2 = np.exp(-2.0 * s)
        return 0.5 * ((s * s + 3.0) * (1.0 - e2) - 3.0 * s * (1.0 + e2))
    return (s * s + 3.0) * np.sinh(s) - 3.0 * s * np.cosh(s)


def _psi2_closed(s, scaled):
    if scaled:
        e2 = np.exp(-2.0 * s)
        return 0.5 * (s * (1.0 + e2) - 3.0 * (1.0 - e2)) + 2.0 * s * np.exp(-s)
    return s * np.cosh(s) - 3.0 * np.sinh(s) + 2.0 * s


def phi0(s, scaled=False):
    return _dispatch(s, _phi0_closed, _phi0_series, scaled)


def phi1(s, scaled=False):
    return _dispatch(s, _phi1_closed, _phi1_series, scaled)


def phi2(s, scaled=False):
    return _dispatch(s, _phi2_closed, _phi2_series, scaled)


def psi0(s, scaled=False):
    return _dispatch(s, _psi0_closed, _psi0_series, scaled)


def psi1(s, scaled=False):
    return _dispatch(s, _psi1_closed, _psi1_series, scaled)


def psi2(s, scaled=False):
    return _dispatch(s, _psi2_closed, _psi2_series, scaled)


PHI = (phi0, phi1, phi2)
PSI = (psi0, psi1, psi2)

_PHI_SERIES = (_phi0_series, _phi1_series, _phi2_series)
_PSI_SERIES = (_psi0_series, _psi1_series, _psi2_series)


def kernel_series_reference(name, s, terms=60):
    """Independent Taylor evaluation of a kernel from its integral definition.

    Used by tests as a second route to phi/psi values; all series have
    positive terms, so no cancellation at any s.
    """
    s = np.asarray(s, dtype=float)
    fact = [float(math.factorial(n)) for n in range(2 * terms + 8)]
    out = np.zeros_like(s)
    if name == "phi0":
        for k in range(terms):
            out += (2 * k + 2) / fact[2 * k + 3] * s ** (2 * k + 3)
    elif name == "phi1":
        for k in range(terms):
            out += 1.0 / ((2 * k + 4) * fact[2 * k + 1]) * s ** (2 * k + 4)
    elif name == "phi2":
        for k in range(terms):
            out += 1.0 / ((2 * k + 5) * fact[2 * k + 1]) * s ** (2 * k + 5)
    elif name == "psi0":
        for k in range(1, terms):
            out += 2 * k / fact[2 * k + 2] * s ** (2 * k + 2)
    elif name == "psi1":
        for k in range(2, terms):
            out += 4 * k * (k - 1) / fact[2 * k + 1] * s ** (2 * k + 1)
    elif name == "psi2":
        for k in range(2, terms):
            out += (2 * k - 2) / fact[2 * k + 1] * s ** (2 * k + 1)
    else:
        raise ValueError(f"unknown kernel {name!r}")
    return out


def _radial_geometry(x, p):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    d = x - np.asarray(p, dtype=float)
    xi = np.linalg.norm(d, axis=1)
    return x, d, xi


def _check_outside(xi, eta):
    if np.any(xi <= eta * (1.0 + 1e-14)):
        raise ValueError("evaluation point inside or on the closed ball")


def _check_tau(tau):
    if not tau > 0.0:
        raise ValueError("tau must be positive")


def _decay_factor(tau, xi, eta, scaled, decay_shift):
    """exp(-tau*(xi-eta)) possibly multiplied by a stabilizing factor.

    scaled=True multiplies by exp(+tau*(xi-eta)) pointwise (no exponential
    left at all); decay_shift=r0 multiplies by exp(+tau*r0), leaving the
    bounded factor exp(-tau*(xi-eta-r0)).  Used so bound sweeps never form
    huge exponentials.
    """
    if scaled:
        return np.ones_like(xi)
    if decay_shift is not None:
        return np.exp(-tau * (xi - eta - decay_shift))
    return np.exp(-tau * (xi - eta))


def moment_scalar(j, x, tau, center, eta, scaled=False, decay_shift=None):
    """I_j(x; tau) = int_B exp(-tau|x-y|)/|x-y| |y-p|^j dy, j in {0,1,2}.

    Accepts a single point or an (N,3) array; returns scalar or (N,).
    See _decay_factor for the scaled/decay_shift stabilizers.
    """
    if j not in (0, 1, 2):
        raise ValueError("j must be 0, 1 or 2")
    _check_tau(tau)
    _, _, xi = _radial_geometry(x, center)
    _check_outside(xi, eta)
    s = tau * eta
    val = (4.0 * np.pi * PHI[j](np.full_like(xi, s), scaled=True) / tau ** (3 + j)
           * _decay_factor(tau, xi, eta, scaled, decay_shift) / xi)
    return val if np.ndim(x) > 1 else float(val[0])


def moment_vector(j, x, tau, center, eta, scaled=False, decay_shift=None):
    """Ivec_j(x; tau), j in {0,1}: ball moments with densities (y-p)/|y-p| and (y-p).

    The result is exactly parallel to x - p.  Shapes as in moment_scalar,
    but vector valued ((3,) or (N,3)).
    """
    if j not in (0, 1):
        raise ValueError("j must be 0 or 1")
    _check_tau(tau)
    _, d, xi = _radial_geometry(x, center)
    _check_outside(xi, eta)
    s = tau * eta
    amp = (4.0 * np.pi / tau ** (3 + j) * (xi + 1.0 / tau) / xi ** 2
           * PSI[j](np.full_like(xi, s), scaled=True)
           * _decay_factor(tau, xi, eta, scaled, decay_shift))
    out = amp[:, None] * d / xi[:, None]
    return out if np.ndim(x) > 1 else out[0]
