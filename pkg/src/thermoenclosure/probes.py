"""Probe fields: closed forms in the Laplace (tau) domain and in time.

Three probes, all built from the compactly supported profile
g(r) = (eta - r)^2 on the ball B(p, eta) placed outside the body:

  shear    -- divergence-free elastic wave v_s = curl(f a), speed sqrt(mu/rho)
  pressure -- curl-free elastic wave v_p = grad(f), speed sqrt((lam+2mu)/rho)
  heat     -- pure temperature field, diffusivity k/c

where f is the spherical-means solution of the scalar wave equation with
initial velocity g (initial value g for the heat probe).  The tau-domain
fields are the T=infinity Laplace transforms; they solve

  (mu Lap - rho tau^2) w_s0 + rho dv_s/dt(.,0) = 0,
  ((lam+2mu) Lap - rho tau^2) w_p0 + rho dv_p/dt(.,0) = 0,
  (k Lap - c tau) Theta00 + c g = 0,

and reduce to the single kernel psi2 via the ball moments: with
V(xi; t) = (4 pi / t^4) (xi + 1/t)/xi^2 psi2(t eta) exp(-t xi),

  w_s0   = -rho/(2 pi mu)        V(xi; tau sqrt(rho/mu))       omega x a
  w_p0   = -rho/(2 pi (lam+2mu)) V(xi; tau sqrt(rho/(lam+2mu))) omega
  Theta00 = 2 c/(k L^5) psi2(L eta) exp(-L xi)/xi,  L = sqrt(c tau / k).

All evaluators are vectorized over an (N,3) array of points and carry the
exponential in factored form so nothing overflows for large tau.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

from .kernels import psi2

PROBE_KINDS = ("shear", "pressure", "heat")


@dataclass(frozen=True)
class Material:
    """Homogeneous isotropic thermoelastic constants.

    rho: mass density; mu, lam: shear/Lame moduli; m: stress-temperature
    modulus (any real); c: specific heat; k: conductivity; theta0:
    reference temperature.
    """
    rho: float = 1.0
    mu: float = 1.0
    lam: float = 1.0
    m: float = 0.0
    c: float = 1.0
    k: float = 1.0
    theta0: float = 1.0

    def __post_init__(self):
        if self.rho <= 0 or self.c <= 0 or self.k <= 0 or self.theta0 <= 0:
            raise ValueError("rho, c, k, theta0 must be positive")
        if self.mu <= 0 or 3.0 * self.lam + 2.0 * self.mu <= 0:
            raise ValueError("need mu > 0 and 3*lam + 2*mu > 0")

    @property
    def shear_speed(self):
        return np.sqrt(self.mu / self.rho)

    @property
    def pressure_speed(self):
        return np.sqrt((self.lam + 2.0 * self.mu) / self.rho)

    @property
    def diffusivity(self):
        return self.k / self.c

    def slowness(self, mode):
        """The factor multiplying dist(D,B) in the decay rate: sqrt(rho/mu),
        sqrt(rho/(lam+2mu)) or sqrt(c/k) depending on the probe mode."""
        if mode == "shear":
            return np.sqrt(self.rho / self.mu)
        if mode == "pressure":
            return np.sqrt(self.rho / (self.lam + 2.0 * self.mu))
        if mode == "heat":
            return np.sqrt(self.c / self.k)
        raise ValueError(f"unknown mode {mode!r}")


@dataclass(frozen=True)
class Probe:
    """Probe specification: kind, ball center p, radius eta, shear direction a."""
    kind: str
    center: tuple = (0.0, 0.0, 0.0)
    eta: float = 0.1
    direction: tuple | None = None
    label: str = ""

    def __post_init__(self):
        if self.kind not in PROBE_KINDS:
            raise ValueError(f"probe kind must be one of {PROBE_KINDS}")
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))
        if self.kind == "shear":
            if self.direction is None:
                raise ValueError("shear probe requires a unit direction a")
            a = np.asarray(self.direction, dtype=float)
            if abs(np.linalg.norm(a) - 1.0) > 1e-8:
                raise ValueError("shear direction a must be a unit vector")
            object.__setattr__(self, "direction", tuple(a))
        elif self.direction is not None:
            object.__setattr__(self, "direction", tuple(float(v) for v in self.direction))

    @property
    def p(self):
        return np.asarray(self.center, dtype=float)

    @property
    def a(self):
        return None if self.direction is None else np.asarray(self.direction, dtype=float)


def _cross_matrix(a):
    """E with (E v) = v x a, i.e. E_ij = eps_{ijl} a_l."""
    return np.array([
        [0.0, a[2], -a[1]],
        [-a[2], 0.0, a[0]],
        [a[1], -a[0], 0.0],
    ])


class TauProbeField:
    """Closed-form tau-domain probe field and its exact spatial derivatives.

    `scaled=True` multiplies values by exp(+t*(xi-eta)) pointwise and
    `decay_shift=r0` by exp(+t*r0) (t the mode's modified-Helmholtz rate);
    both stabilizers apply consistently to values and derivatives.
    """

    def __init__(self, probe, material, tau):
        if tau <= 0:
            raise ValueError("tau must be positive")
        self.probe = probe
        self.material = material
        self.tau = float(tau)
        mat = material
        if probe.kind == "shear":
            self.rate = tau * np.sqrt(mat.rho / mat.mu)
            self.coeff = -mat.rho / (2.0 * np.pi * mat.mu)
        elif probe.kind == "pressure":
            self.rate = tau * np.sqrt(mat.rho / (mat.lam + 2.0 * mat.mu))
            self.coeff = -mat.rho / (2.0 * np.pi * (mat.lam + 2.0 * mat.mu))
        else:
            self.rate = np.sqrt(mat.c * tau / mat.k)
            self.coeff = 2.0 * mat.c / (mat.k * self.rate ** 5)

    # -- radial amplitudes ------------------------------------------------
    def _geom(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        d = x - self.probe.p[None, :]
        xi = np.linalg.norm(d, axis=1)
        if np.any(xi <= self.probe.eta * (1.0 + 1e-14)):
            raise ValueError("evaluation point inside or on the closed probe ball")
        return x, d, xi

    def _decay(self, xi, scaled, decay_shift):
        if scaled:
            return np.ones_like(xi)
        if decay_shift is not None:
            return np.exp(-self.rate * (xi - self.probe.eta - decay_shift))
        return np.exp(-self.rate * (xi - self.probe.eta))

    def _q(self, xi, scaled, decay_shift):
        """Q(xi) = V(xi)/xi (field = Q * (x-p) x a or Q * (x-p)), with Q'."""
        t = self.rate
        s = t * self.probe.eta
        Q = self.coeff * (4.0 * np.pi / t ** 4) * (xi + 1.0 / t) / xi ** 3 \
            * psi2(np.full_like(xi, s), scaled=True) * self._decay(xi, scaled, decay_shift)
        dlog = 1.0 / (xi + 1.0 / t) - 3.0 / xi - t
        return Q, Q * dlog

    def _scalar_amplitude(self, xi, scaled, decay_shift):
        """S(xi) for the heat probe temperature, and S'."""
        t = self.rate
        s = t * self.probe.eta
        S = self.coeff * psi2(np.full_like(xi, s), scaled=True) \
            * self._decay(xi, scaled, decay_shift) / xi
        dlog = -1.0 / xi - t
        return S, S * dlog

    # -- public fields ----------------------------------------------------
    def displacement(self, x, scaled=False, decay_shift=None):
        x, d, xi = self._geom(x)
        if self.probe.kind == "heat":
            return np.zeros_like(d)
        Q, _ = self._q(xi, scaled, decay_shift)
        if self.probe.kind == "shear":
            return Q[:, None] * np.cross(d, self.probe.a[None, :])
        return Q[:, None] * d

    def temperature(self, x, scaled=False, decay_shift=None):
        x, _, xi = self._geom(x)
        if self.probe.kind != "heat":
            return np.zeros(len(x))
        S, _ = self._scalar_amplitude(xi, scaled, decay_shift)
        return S

    def jacobian(self, x, scaled=False, decay_shift=None):
        """J[n,i,j] = d(displacement_i)/dx_j at each point."""
        x, d, xi = self._geom(x)
        n = len(x)
        if self.probe.kind == "heat":
            return np.zeros((n, 3, 3))
        Q, Qp = self._q(xi, scaled, decay_shift)
        omega = d / xi[:, None]
        if self.probe.kind == "shear":
            c = np.cross(d, self.probe.a[None, :])
            J = Qp[:, None, None] * c[:, :, None] * omega[:, None, :]
            J += Q[:, None, None] * _cross_matrix(self.probe.a)[None, :, :]
            return J
        J = Qp[:, None, None] * d[:, :, None] * omega[:, None, :]
        J += Q[:, None, None] * np.eye(3)[None, :, :]
        return J

    def grad_temperature(self, x, scaled=False, decay_shift=None):
        x, d, xi = self._geom(x)
        if self.probe.kind != "heat":
            return np.zeros_like(d)
        _, Sp = self._scalar_amplitude(xi, scaled, decay_shift)
        return Sp[:, None] * d / xi[:, None]

    def divergence(self, x, scaled=False, decay_shift=None):
        x, _, xi = self._geom(x)
        if self.probe.kind != "pressure":
            return np.zeros(len(x))
        Q, Qp = self._q(xi, scaled, decay_shift)
        return Qp * xi + 3.0 * Q

    def traction(self, x, nu):
        """s(w0, Xi0) nu with s = 2 mu Sym(grad) + lam div I + m theta I."""
        x2, _, _ = self._geom(x)
        nu = np.broadcast_to(np.asarray(nu, dtype=float), x2.shape)
        mat = self.material
        J = self.jacobian(x)
        sym = 0.5 * (J + np.swapaxes(J, 1, 2))
        tr = np.trace(J, axis1=1, axis2=2)
        out = 2.0 * mat.mu * np.einsum("nij,nj->ni", sym, nu)
        out += (mat.lam * tr + mat.m * self.temperature(x))[:, None] * nu
        return out

    def flux(self, x, nu):
        """f = -k grad(Xi0) . nu (identically zero for the wave probes)."""
        x2, _, _ = self._geom(x)
        nu = np.broadcast_to(np.asarray(nu, dtype=float), x2.shape)
        return -self.material.k * np.einsum("ni,ni->n", self.grad_temperature(x), nu)


# -- time domain ----------------------------------------------------------

class _WaveProfile:
    """Spherical-means reduction for radial initial velocity g(s)=(eta-s)^2.

    f(r,t) = [P(r+ct) - P(|r-ct|)] / (2 c r) with P(z) = int_0^z s g(s) ds,
    a piecewise quartic clamped at P(eta) = eta^4/12.
    """

    def __init__(self, eta, speed):
        self.eta = float(eta)
        self.c = float(speed)

    def _P(self, z):
        z = np.minimum(z, self.eta)
        e = self.eta
        return 0.5 * e * e * z * z - (2.0 * e / 3.0) * z ** 3 + 0.25 * z ** 4

    def _P1(self, z):
        inside = z < self.eta
        return np.where(inside, z * (self.eta - z) ** 2, 0.0)

    def _P2(self, z):
        inside = z < self.eta
        return np.where(inside, (self.eta - z) * (self.eta - 3.0 * z), 0.0)

    def pieces(self, r, t):
        b = r + self.c * t
        a = np.abs(r - self.c * t)
        sg = np.sign(r - self.c * t)
        dP = self._P(b) - self._P(a)
        dP1 = self._P1(b) - sg * self._P1(a)
        dP2 = self._P2(b) - self._P2(a)
        return dP, dP1, dP2, sg

    def f_r(self, r, t):
        dP, dP1, _, _ = self.pieces(r, t)
        f = dP / (2.0 * self.c * r)
        return dP1 / (2.0 * self.c * r) - f / r

    def f_rr(self, r, t):
        dP, dP1, dP2, _ = self.pieces(r, t)
        c = self.c
        return dP2 / (2.0 * c * r) - dP1 / (c * r * r) + dP / (c * r ** 3)

    def f_t(self, r, t):
        b = r + self.c * t
        a = np.abs(r - self.c * t)
        sg = np.sign(r - self.c * t)
        return (self._P1(b) + sg * self._P1(a)) / (2.0 * r)

    def f_rt(self, r, t):
        b = r + self.c * t
        a = np.abs(r - self.c * t)
        return (self._P2(b) + self._P2(a)) / (2.0 * r) - self.f_t(r, t) / r


def _gauss_moments(a, b):
    """G_k = int_a^b u^k exp(-u^2) du for k = 0..4, vectorized."""
    ea, eb = np.exp(-a * a), np.exp(-b * b)
    erfd = erf(b) - erf(a)
    g0 = 0.5 * np.sqrt(np.pi) * erfd
    g1 = 0.5 * (ea - eb)
    g2 = 0.5 * g0 + 0.5 * (a * ea - b * eb)
    g3 = 0.5 * ((a * a + 1.0) * ea - (b * b + 1.0) * eb)
    g4 = 0.375 * np.sqrt(np.pi) * erfd + (a ** 3 / 2.0 + 0.75 * a) * ea - (b ** 3 / 2.0 + 0.75 * b) * eb
    return g0, g1, g2, g3, g4


class _HeatProfile:
    """Exact radial heat evolution of the initial profile g(r) = (eta-r)^2.

    Theta(r,t) = [F(r) - F(-r)] / (2 r sqrt(pi kappa t)) with
    F(c) = int_0^eta s g(s) exp(-(s-c)^2/(4 kappa t)) ds; the integrand is
    cubic x Gaussian, done exactly with erf moments.
    """

    def __init__(self, eta, kappa):
        self.eta = float(eta)
        self.kappa = float(kappa)

    def _F_and_dF(self, ctr, w):
        """F(ctr) and dF/dctr for Gaussian width w = 2 sqrt(kappa t)."""
        e = self.eta
        a = (0.0 - ctr) / w
        b = (e - ctr) / w
        g0, g1, g2, g3, g4 = _gauss_moments(a, b)
        # s = ctr + u w; s (e-s)^2 = k0 + k1 u + k2 u^2 + k3 u^3
        A = e - ctr
        k0 = ctr * A * A
        k1 = w * A * (A - 2.0 * ctr)
        k2 = w * w * (ctr - 2.0 * A)
        k3 = w ** 3
        F = w * (k0 * g0 + k1 * g1 + k2 * g2 + k3 * g3)
        # dF/dctr = int s g(s) * 2(s-ctr)/w^2 * exp(...) ds
        #        = (2/w) * int (k0 + k1 u + ...) u exp(-u^2) du
        dF = 2.0 * (k0 * g1 + k1 * g2 + k2 * g3 + k3 * g4)
        return F, dF

    def value_grad(self, r, t):
        """(Theta(r,t), dTheta/dr), vectorized over r; t > 0."""
        w = 2.0 * np.sqrt(self.kappa * t)
        norm = np.sqrt(np.pi * self.kappa * t)
        r = np.asarray(r, dtype=float)
        tiny = r < 1e-9 * max(w, self.eta)
        rr = np.where(tiny, 1.0, r)
        Fp, dFp = self._F_and_dF(rr, w)
        Fm, dFm = self._F_and_dF(-rr, w)
        theta = (Fp - Fm) / (2.0 * rr * norm)
        dtheta = (dFp + dFm) / (2.0 * rr * norm) - theta / rr
        if np.any(tiny):
            # r -> 0 limit: Theta(0,t) = F'(0)/norm, dTheta/dr(0) = 0 by symmetry
            _, dF0 = self._F_and_dF(np.zeros(1), w)
            theta = np.where(tiny, dF0[0] / norm, theta)
            dtheta = np.where(tiny, 0.0, dtheta)
        return theta, dtheta


class TimeProbeField:
    """Time-domain probe field (v, Theta), its velocity and derivatives."""

    def __init__(self, probe, material):
        self.probe = probe
        self.material = material
        if probe.kind == "shear":
            self.wave = _WaveProfile(probe.eta, material.shear_speed)
        elif probe.kind == "pressure":
            self.wave = _WaveProfile(probe.eta, material.pressure_speed)
        else:
            self.heat = _HeatProfile(probe.eta, material.diffusivity)

    def _geom(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        d = x - self.probe.p[None, :]
        xi = np.linalg.norm(d, axis=1)
        if self.probe.kind != "heat" and np.any(xi < 1e-12):
            raise ValueError("wave probes cannot be evaluated at the ball center")
        return x, d, xi

    def displacement(self, x, t):
        x, d, xi = self._geom(x)
        if self.probe.kind == "heat" or t == 0.0:
            return np.zeros_like(d)
        fr = self.wave.f_r(xi, t)
        if self.probe.kind == "shear":
            return (fr / xi)[:, None] * np.cross(d, self.probe.a[None, :])
        return (fr / xi)[:, None] * d

    def velocity(self, x, t):
        x, d, xi = self._geom(x)
        if self.probe.kind == "heat":
            return np.zeros_like(d)
        if t == 0.0:
            # exact initial velocity: curl/grad of g, supported in the ball
            inside = xi < self.probe.eta
            amp = np.where(inside, -2.0 * (self.probe.eta - xi) / xi, 0.0)
            if self.probe.kind == "shear":
                return amp[:, None] * np.cross(d, self.probe.a[None, :])
            return amp[:, None] * d
        frt = self.wave.f_rt(xi, t)
        if self.probe.kind == "shear":
            return (frt / xi)[:, None] * np.cross(d, self.probe.a[None, :])
        return (frt / xi)[:, None] * d

    def temperature(self, x, t):
        x, _, xi = self._geom(x)
        if self.probe.kind != "heat":
            return np.zeros(len(x))
        if t == 0.0:
            inside = xi < self.probe.eta
            return np.where(inside, (self.probe.eta - xi) ** 2, 0.0)
        theta, _ = self.heat.value_grad(xi, t)
        return theta

    def jacobian(self, x, t):
        x, d, xi = self._geom(x)
        n = len(x)
        if self.probe.kind == "heat" or t == 0.0:
            return np.zeros((n, 3, 3))
        fr = self.wave.f_r(xi, t)
        frr = self.wave.f_rr(xi, t)
        q = fr / xi
        qp = (frr - q) / xi
        omega = d / xi[:, None]
        if self.probe.kind == "shear":
            c = np.cross(d, self.probe.a[None, :])
            J = qp[:, None, None] * c[:, :, None] * omega[:, None, :]
            J += q[:, None, None] * _cross_matrix(self.probe.a)[None, :, :]
            return J
        J = qp[:, None, None] * d[:, :, None] * omega[:, None, :]
        J += q[:, None, None] * np.eye(3)[None, :, :]
        return J

    def grad_temperature(self, x, t):
        x, d, xi = self._geom(x)
        if self.probe.kind != "heat":
            return np.zeros_like(d)
        if t == 0.0:
            inside = xi < self.probe.eta
            amp = np.where(inside, -2.0 * (self.probe.eta - xi), 0.0)
        else:
            _, amp = self.heat.value_grad(xi, t)
        return amp[:, None] * d / xi[:, None]

    def divergence(self, x, t):
        x, _, xi = self._geom(x)
        if self.probe.kind != "pressure" or t == 0.0:
            return np.zeros(len(x))
        return self.wave.f_rr(xi, t) + 2.0 * self.wave.f_r(xi, t) / xi

    def traction(self, x, t, nu):
        x2, _, _ = self._geom(x)
        nu = np.broadcast_to(np.asarray(nu, dtype=float), x2.shape)
        mat = self.material
        J = self.jacobian(x, t)
        sym = 0.5 * (J + np.swapaxes(J, 1, 2))
        tr = np.trace(J, axis1=1, axis2=2)
        out = 2.0 * mat.mu * np.einsum("nij,nj->ni", sym, nu)
        out += (mat.lam * tr + mat.m * self.temperature(x, t))[:, None] * nu
        return out

    def flux(self, x, t, nu):
        x2, _, _ = self._geom(x)
        nu = np.broadcast_to(np.asarray(nu, dtype=float), x2.shape)
        return -self.material.k * np.einsum("ni,ni->n", self.grad_temperature(x, t), nu)


# -- spec-level convenience wrappers --------------------------------------

def probe_field_tau(probe, material, x, tau):
    """(displacement, temperature) of the tau-domain probe at x."""
    f = TauProbeField(probe, material, tau)
    single = np.ndim(x) == 1
    disp = f.displacement(x)
    temp = f.temperature(x)
    return (disp[0], float(temp[0])) if single else (disp, temp)


def probe_field_time(probe, material, x, t):
    """(displacement, temperature) of the time-domain probe at (x, t>=0)."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    f = TimeProbeField(probe, material)
    single = np.ndim(x) == 1
    disp = f.displacement(x, t)
    temp = f.temperature(x, t)
    return (disp[0], float(temp[0])) if single else (disp, temp)


def probe_traction_flux(probe, material, x, nu, tau=None, t=None):
    """(traction, flux) of the probe field at boundary points x with normal nu.

    Exactly one of tau (Laplace domain) or t (time domain) must be given.
    """
    if (tau is None) == (t is None):
        raise ValueError("give exactly one of tau or t")
    nu_arr = np.asarray(nu, dtype=float)
    if not np.allclose(np.linalg.norm(np.atleast_2d(nu_arr), axis=1), 1.0, atol=1e-8):
        raise ValueError("normal vectors must be unit length")
    single = np.ndim(x) == 1
    if tau is not None:
        f = TauProbeField(probe, material, tau)
        tr, fl = f.traction(x, nu), f.flux(x, nu)
    else:
        f = TimeProbeField(probe, material)
        tr, fl = f.traction(x, t, nu), f.flux(x, t, nu)
    return (tr[0], float(fl[0])) if single else (tr, fl)
