"""Quadrature rules shared by oracles, energy integrals and bound sweeps."""

import numpy as np


def gauss_panels(a, b, n_per_panel, breakpoints=None):
    """Gauss-Legendre nodes/weights on [a,b], optionally split into panels."""
    edges = [a, b] if breakpoints is None else [a] + [a + (b - a) * t for t in breakpoints] + [b]
    g, w = np.polynomial.legendre.leggauss(n_per_panel)
    xs, ws = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        xs.append(0.5 * (hi - lo) * (g + 1.0) + lo)
        ws.append(0.5 * (hi - lo) * w)
    return np.concatenate(xs), np.concatenate(ws)


def sphere_rule(n_polar, n_azimuth=None, axis=None):
    """Product rule on the unit sphere: Gauss in cos(theta) x uniform in phi.

    Exact for spherical harmonics up to degree min(2*n_polar-1, n_azimuth-1).
    If axis is given, the polar axis is rotated onto it (useful when the
    integrand concentrates around a known direction).  Returns (dirs, w)
    with sum(w) = 4*pi.
    """
    if n_azimuth is None:
        n_azimuth = 2 * n_polar
    u, wu = np.polynomial.legendre.leggauss(n_polar)
    phi = (np.arange(n_azimuth) + 0.5) * 2.0 * np.pi / n_azimuth
    wphi = 2.0 * np.pi / n_azimuth
    U, PH = np.meshgrid(u, phi, indexing="ij")
    st = np.sqrt(1.0 - U ** 2)
    dirs = np.stack([st * np.cos(PH), st * np.sin(PH), U], axis=-1).reshape(-1, 3)
    w = (wu[:, None] * np.full(n_azimuth, wphi)[None, :]).reshape(-1)
    if axis is not None:
        dirs = dirs @ rotation_to_axis(axis).T
    return dirs, w


def rotation_to_axis(axis):
    """Rotation matrix taking e_z to the given unit axis."""
    a = np.asarray(axis, dtype=float)
    a = a / np.linalg.norm(a)
    ez = np.array([0.0, 0.0, 1.0])
    v = np.cross(ez, a)
    c = float(ez @ a)
    if np.linalg.norm(v) < 1e-14:
        return np.eye(3) if c > 0 else np.diag([1.0, -1.0, -1.0])
    vx = np.array([[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0.0]])
    return np.eye(3) + vx + vx @ vx / (1.0 + c)


def ball_rule(center, radius, n_radial=24, n_polar=24, n_azimuth=None, axis=None,
              radial_breaks=(0.5, 0.8, 0.95)):
    """Product quadrature over a ball, graded radially toward the surface.

    The grading handles boundary-layer integrands exp(-tau*(dist to an
    exterior point)); align `axis` with the direction of the exterior point
    for the polar clustering of the Gauss rule to help as well.
    """
    r, wr = gauss_panels(0.0, radius, n_radial, breakpoints=list(radial_breaks))
    dirs, wd = sphere_rule(n_polar, n_azimuth, axis=axis)
    pts = (np.asarray(center, dtype=float)[None, None, :]
           + r[:, None, None] * dirs[None, :, :]).reshape(-1, 3)
    w = (wr[:, None] * wd[None, :] * (r ** 2)[:, None]).reshape(-1)
    return pts, w


# 3-point degree-2 facet rule (barycentric (2/3,1/6,1/6) and permutations,
# equal weights area/3)
_FACET_BARY = np.array([
    [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
    [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
    [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
])


def facet_points(tri_nodes):
    """Quadrature points of the 3-point rule on one triangle (3,3)->(3,3)."""
    return _FACET_BARY @ np.asarray(tri_nodes, dtype=float)


def facet_rule_batch(nodes, facets):
    """Points, weights, normals, areas for the 3-pt rule on many facets.

    nodes (N,3), facets (F,3) int.  Returns qp (F,3,3), w (F,3), normal
    (F,3) unit, area (F,).  Normal follows the facet orientation
    (right-hand rule on the stored vertex order).
    """
    tri = nodes[facets]                     # (F,3,3)
    qp = np.einsum("qb,fbx->fqx", _FACET_BARY, tri)
    nvec = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    area = 0.5 * np.linalg.norm(nvec, axis=1)
    normal = nvec / (2.0 * area)[:, None]
    w = np.repeat(area[:, None] / 3.0, 3, axis=1)
    return qp, w, normal, area


def conical_tet_rule(n=3):
    """Conical-product rule on the reference tet, exact to degree 2n-1.

    Returns (bary (nq,4), w (nq,)) with sum(w) = 1/6.  Built from
    Gauss-Jacobi((1-t)^2), Gauss-Jacobi((1-t)^1) and Gauss-Legendre
    factors, so correctness is by construction rather than tabulation.
    """
    from scipy.special import roots_jacobi, roots_legendre

    def jac01(n, alpha):
        u, w = roots_jacobi(n, alpha, 0.0)
        return (1.0 + u) / 2.0, w / 2.0 ** (alpha + 1)

    t1, w1 = jac01(n, 2.0)
    t2, w2 = jac01(n, 1.0)
    u3, w3raw = roots_legendre(n)
    t3, w3 = (1.0 + u3) / 2.0, w3raw / 2.0
    T1, T2, T3 = np.meshgrid(t1, t2, t3, indexing="ij")
    x = T1
    y = T2 * (1.0 - T1)
    z = T3 * (1.0 - T1) * (1.0 - T2)
    w = (w1[:, None, None] * w2[None, :, None] * w3[None, None, :])
    lam = np.stack([1.0 - x - y - z, x, y, z], axis=-1).reshape(-1, 4)
    return lam, w.reshape(-1)


def conical_tri_rule(n=3):
    """Conical-product rule on the reference triangle, degree 2n-1.

    Returns (bary (nq,3), w (nq,)) with sum(w) = 1/2.
    """
    from scipy.special import roots_jacobi, roots_legendre

    u1, w1raw = roots_jacobi(n, 1.0, 0.0)
    t1, w1 = (1.0 + u1) / 2.0, w1raw / 4.0
    u2, w2raw = roots_legendre(n)
    t2, w2 = (1.0 + u2) / 2.0, w2raw / 2.0
    T1, T2 = np.meshgrid(t1, t2, indexing="ij")
    x = T1
    y = T2 * (1.0 - T1)
    w = w1[:, None] * w2[None, :]
    lam = np.stack([1.0 - x - y, x, y], axis=-1).reshape(-1, 3)
    return lam, w.reshape(-1)


# 4-point degree-2 tetrahedron rule
_TET_A = (5.0 + 3.0 * np.sqrt(5.0)) / 20.0
_TET_B = (5.0 - np.sqrt(5.0)) / 20.0
_TET_BARY = np.full((4, 4), _TET_B)
np.fill_diagonal(_TET_BARY, _TET_A)

def tet_rule_batch(nodes, tets):
    """Points and weights of the degree-2 4-point rule on many tets.

    Returns qp (T,4,3) and w (T,4) with sum(w, axis=1) = volume.
    """
    verts = nodes[tets]                     # (T,4,3)
    qp = np.einsum("qb,tbx->tqx", _TET_BARY, verts)
    vol = tet_volumes(nodes, tets)
    w = np.repeat(vol[:, None] / 4.0, 4, axis=1)
    return qp, w


def tet_volumes(nodes, tets):
    verts = nodes[tets]
    d = verts[:, 1:] - verts[:, :1]
    return np.linalg.det(d) / 6.0
