"""Closed-form probe fields against brute-force quadrature.

Walks through the ball moment integrals, their Newtonian limits, the three
tau-domain probe fields, and the time-domain probes whose Laplace
transforms they are.
"""

import numpy as np

from thermoenclosure import Material, Probe, TauProbeField, moment_scalar
from thermoenclosure.oracles import (oracle_laplace_of_time_probe,
                                     oracle_moment_scalar, oracle_probe_tau)

mat = Material(rho=1.0, mu=1.0, lam=1.0, m=0.5)
p = np.zeros(3)

print("== ball moments ==")
x = np.array([2.0, 0.0, 0.0])
print("I0 at tau->0 vs Newtonian 2pi/3:",
      moment_scalar(0, x, 1e-6, p, 1.0), 2 * np.pi / 3)
print("I2 at tau->0 vs Newtonian 2pi/5:",
      moment_scalar(2, x, 1e-6, p, 1.0), 2 * np.pi / 5)
for tau in (0.5, 3.0, 20.0):
    got = moment_scalar(1, x, tau, p, 0.5)
    ref = oracle_moment_scalar(1, x, tau, p, 0.5)
    print(f"I1(tau={tau}): closed {got:.12e}  oracle {ref:.12e}  "
          f"rel {abs(got - ref) / ref:.1e}")

print("\n== tau-domain probe fields vs ball quadrature ==")
for kind in ("shear", "pressure", "heat"):
    probe = Probe(kind, (0, 0, 0), 0.4,
                  direction=(0, 0, 1) if kind == "shear" else None)
    xq = np.array([1.1, 0.7, -0.3])
    f = TauProbeField(probe, mat, 5.0)
    disp = f.displacement(xq[None, :])[0]
    temp = f.temperature(xq[None, :])[0]
    dref, tref = oracle_probe_tau(probe, mat, xq, 5.0)
    if kind == "heat":
        print(f"{kind}: Theta00 {temp:.10e} vs {tref:.10e}")
    else:
        print(f"{kind}: |w0| {np.linalg.norm(disp):.10e} vs "
              f"{np.linalg.norm(dref):.10e}")

print("\n== the tau probes are Laplace transforms of the time probes ==")
probe = Probe("shear", (0, 0, 0), 0.4, direction=(0, 1, 0))
xq = np.array([1.2, 0.5, 0.4])
dlt, _ = oracle_laplace_of_time_probe(probe, mat, xq, 3.0)
f = TauProbeField(probe, mat, 3.0)
ref = f.displacement(xq[None, :])[0]
print("int e^{-3t} v_s dt:", dlt)
print("w_s0 closed form:  ", ref)
