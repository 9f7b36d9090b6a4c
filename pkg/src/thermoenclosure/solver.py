"""Coupled displacement-temperature forward solves on tetrahedral meshes.

Continuous P1 or isoparametric P2 elements for all four unknowns (three
displacement components + temperature).  With order=2 the midside nodes of
boundary facets are projected onto the spheres fitted to the tagged
boundary nodes, so the discrete body is curved to quadratic accuracy; this
is what makes the indicator identity residuals converge below the
acceptance tolerances at the benchmark refinement level (P1 on the same
surface saturates near 6%).

Two problems share the same operator:

  tau domain (T=infinity idealization of the Laplace-transformed system):
      2mu Sym grad w : Sym grad psi + lam div w div psi + rho tau^2 w.psi
        + m Xi div psi                       = outer/cavity traction loads
      k grad Xi . grad chi + c tau Xi chi
        - m theta0 tau div w chi             = -(flux loads)

  time domain: Newmark(1/4,1/2) on the elastic block, Crank-Nicolson on
  the heat block, coupling implicit, constant system matrix factored once.

Both come in a "total field" flavor (probe data on the outer boundary,
homogeneous natural conditions on the cavity) and a "reflected field"
flavor (zero outer data, minus-probe data on the cavity boundary), which
solves for w - w0 directly and is what the indicator pipeline uses: the
total-field route loses the exponentially small indicator information to
discretization error at large tau.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import CAVITY, OUTER
from .probes import TauProbeField, TimeProbeField
from .quadrature import (conical_tet_rule, conical_tri_rule, _FACET_BARY,
                         _TET_BARY)


class SolverError(RuntimeError):
    pass


# -- reference bases -------------------------------------------------------

_TET_EDGES = np.array([[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]])
_TRI_EDGES = np.array([[0, 1], [1, 2], [2, 0]])


def _tet_basis(lam, order):
    """(values (nq,nb), bary-gradients (nq,nb,4)) of the tet basis."""
    lam = np.asarray(lam)
    nq = len(lam)
    if order == 1:
        vals = lam.copy()
        grads = np.broadcast_to(np.eye(4)[None, :, :], (nq, 4, 4)).copy()
        return vals, grads
    vals = np.empty((nq, 10))
    grads = np.zeros((nq, 10, 4))
    for i in range(4):
        vals[:, i] = lam[:, i] * (2.0 * lam[:, i] - 1.0)
        grads[:, i, i] = 4.0 * lam[:, i] - 1.0
    for e, (a, b) in enumerate(_TET_EDGES):
        vals[:, 4 + e] = 4.0 * lam[:, a] * lam[:, b]
        grads[:, 4 + e, a] = 4.0 * lam[:, b]
        grads[:, 4 + e, b] = 4.0 * lam[:, a]
    return vals, grads


def _tri_basis(lam, order):
    lam = np.asarray(lam)
    nq = len(lam)
    if order == 1:
        vals = lam.copy()
        grads = np.broadcast_to(np.eye(3)[None, :, :], (nq, 3, 3)).copy()
        return vals, grads
    vals = np.empty((nq, 6))
    grads = np.zeros((nq, 6, 3))
    for i in range(3):
        vals[:, i] = lam[:, i] * (2.0 * lam[:, i] - 1.0)
        grads[:, i, i] = 4.0 * lam[:, i] - 1.0
    for e, (a, b) in enumerate(_TRI_EDGES):
        vals[:, 3 + e] = 4.0 * lam[:, a] * lam[:, b]
        grads[:, 3 + e, a] = 4.0 * lam[:, b]
        grads[:, 3 + e, b] = 4.0 * lam[:, a]
    return vals, grads


def _bary_to_ref_tet(grads_bary):
    """Chain rule from barycentric to reference (x,y,z) coordinates."""
    # lam = (1-x-y-z, x, y, z): d lam / d ref = rows
    D = np.array([[-1.0, -1.0, -1.0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])
    return np.einsum("qbl,lr->qbr", grads_bary, D)


def _bary_to_ref_tri(grads_bary):
    D = np.array([[-1.0, -1.0], [1, 0], [0, 1]])
    return np.einsum("qbl,lr->qbr", grads_bary, D)


def _fit_sphere(points):
    """Least-squares sphere through points: returns (center, radius, resid)."""
    A = np.concatenate([2.0 * points, np.ones((len(points), 1))], axis=1)
    b = np.sum(points ** 2, axis=1)
    sol, *_ = np.linalg.lstsq(A, b, rcond=None)
    center = sol[:3]
    radius = np.sqrt(sol[3] + center @ center)
    resid = np.max(np.abs(np.linalg.norm(points - center, axis=1) - radius))
    return center, radius, resid


def p2_connectivity(mesh):
    """(all_coords, conn10, edge_of_pair) for the quadratic space."""
    tets = mesh.tets
    pairs = np.sort(tets[:, _TET_EDGES].reshape(-1, 2), axis=1)
    uniq, inv = np.unique(pairs, axis=0, return_inverse=True)
    n = mesh.n_nodes
    conn = np.concatenate([tets, n + inv.reshape(len(tets), 6)], axis=1)
    mid = 0.5 * (mesh.nodes[uniq[:, 0]] + mesh.nodes[uniq[:, 1]])
    coords = np.concatenate([mesh.nodes, mid])
    edge_lookup = {(int(a), int(b)): n + i for i, (a, b) in enumerate(uniq)}
    return coords, conn, edge_lookup


class FemBlocks:
    """Assembled matrix blocks and quadrature structures for one mesh.

    order=1: P1 with the spec's degree-2 tet rule and 3-point facet rule.
    order=2: isoparametric P2 with conical-product rules (degree 5 volume,
    degree 5 facets) and curved boundary (sphere-projected midside nodes)
    unless curved=False.
    """

    CHUNK = 20000

    def __init__(self, mesh, material, order=1, curved=True):
        if order not in (1, 2):
            raise ValueError("order must be 1 or 2")
        self.mesh = mesh
        self.material = material
        self.order = order
        if order == 1:
            coords = mesh.nodes
            conn = mesh.tets
            lam_v = _TET_BARY
            w_ref_v = np.full(4, 1.0 / 24.0)
            lam_f = _FACET_BARY
            w_ref_f = np.full(3, 1.0 / 6.0)
            self._edge_lookup = None
        else:
            coords, conn, self._edge_lookup = p2_connectivity(mesh)
            if curved:
                coords = self._project_boundary_midnodes(coords)
            lam_v, w_ref_v = conical_tet_rule(3)
            lam_f, w_ref_f = conical_tri_rule(3)
        self.all_coords = coords
        self.conn = conn
        self.n_nodes = len(coords)
        nb = conn.shape[1]

        vals_v, gb = _tet_basis(lam_v, order)
        gref = _bary_to_ref_tet(gb)                      # (nq, nb, 3)
        self.tet_basis = vals_v
        nq = len(lam_v)
        T = len(conn)
        n = self.n_nodes
        mat = material

        self.tet_qp = np.empty((T, nq, 3))
        self.tet_w = np.empty((T, nq))
        self.tet_grads = np.empty((T, nq, nb, 3))
        KeA = sp.csr_matrix((3 * n, 3 * n))
        Ms = sp.csr_matrix((n, n))
        Kh = sp.csr_matrix((n, n))
        Bc = sp.csr_matrix((3 * n, n))
        Dc = sp.csr_matrix((n, 3 * n))
        eye3 = np.eye(3)
        for lo in range(0, T, self.CHUNK):
            hi = min(lo + self.CHUNK, T)
            X = coords[conn[lo:hi]]                      # (t, nb, 3)
            J = np.einsum("tbd,qbr->tqdr", X, gref)      # (t, nq, 3, 3)
            detJ = np.linalg.det(J)
            if np.any(detJ <= 0):
                raise SolverError("nonpositive isoparametric jacobian")
            Jinv = np.linalg.inv(J)
            G = np.einsum("qbr,tqrd->tqbd", gref, Jinv)  # phys gradients
            W = detJ * w_ref_v[None, :]
            self.tet_qp[lo:hi] = np.einsum("qb,tbd->tqd", vals_v, X)
            self.tet_w[lo:hi] = W
            self.tet_grads[lo:hi] = G
            ke1 = np.einsum("tq,tqad,tqbd->tab", W, G, G, optimize=True)
            # ke2[t,a,p,b,q] = sum_q W g_{a,p} g_{b,q}
            ke2 = np.einsum("tq,tqap,tqbr->tapbr", W, G, G, optimize=True)
            Keel = (mat.mu * np.einsum("tab,ij->taibj", ke1, eye3)
                    + mat.mu * np.transpose(ke2, (0, 1, 4, 3, 2))  # g_aj g_bi
                    + mat.lam * ke2)                               # g_ai g_bj
            msel = np.einsum("tq,qa,qb->tab", W, vals_v, vals_v, optimize=True)
            bcel = np.einsum("tq,tqai,qb->taib", W, G, vals_v, optimize=True)
            dcel = np.einsum("tq,qa,tqbj->tabj", W, vals_v, G, optimize=True)
            ti = conn[lo:hi]
            edof = 3 * ti[:, :, None] + np.arange(3)[None, None, :]
            t = hi - lo
            rK = np.broadcast_to(edof[:, :, :, None, None], (t, nb, 3, nb, 3)).reshape(-1)
            cK = np.broadcast_to(edof[:, None, None, :, :], (t, nb, 3, nb, 3)).reshape(-1)
            KeA = KeA + sp.coo_matrix((Keel.reshape(-1), (rK, cK)),
                                      shape=(3 * n, 3 * n)).tocsr()
            rM = np.broadcast_to(ti[:, :, None], (t, nb, nb)).reshape(-1)
            cM = np.broadcast_to(ti[:, None, :], (t, nb, nb)).reshape(-1)
            Ms = Ms + sp.coo_matrix((msel.reshape(-1), (rM, cM)), shape=(n, n)).tocsr()
            Kh = Kh + sp.coo_matrix((ke1.reshape(-1), (rM, cM)), shape=(n, n)).tocsr()
            rB = np.broadcast_to(edof[:, :, :, None], (t, nb, 3, nb)).reshape(-1)
            cB = np.broadcast_to(ti[:, None, None, :], (t, nb, 3, nb)).reshape(-1)
            Bc = Bc + sp.coo_matrix((bcel.reshape(-1), (rB, cB)), shape=(3 * n, n)).tocsr()
            rD = np.broadcast_to(ti[:, :, None, None], (t, nb, nb, 3)).reshape(-1)
            cD = np.broadcast_to(edof[:, None, :, :], (t, nb, nb, 3)).reshape(-1)
            Dc = Dc + sp.coo_matrix((dcel.reshape(-1), (rD, cD)), shape=(n, 3 * n)).tocsr()
        self.Ke, self.Ms, self.Kh, self.Bc, self.Dc = KeA, Ms, Kh, Bc, Dc
        self.Mv = sp.kron(Ms, sp.eye(3), format="csr")
        self.vols = self.tet_w.sum(axis=1)

        vals_f, gf = _tri_basis(lam_f, order)
        gref_f = _bary_to_ref_tri(gf)                    # (nqf, nbf, 2)
        self.facet_basis = vals_f
        self.facet_data = {}
        for tag in (OUTER, CAVITY):
            idx = np.where(mesh.boundary_tags == tag)[0]
            if len(idx) == 0:
                continue
            facets = mesh.boundary_facets[idx]
            fnodes = self._facet_nodes(facets)
            Xf = coords[fnodes]                          # (F, nbf, 3)
            qp = np.einsum("qb,fbd->fqd", vals_f, Xf)
            tu = np.einsum("qbr,fbd->fqrd", gref_f, Xf)  # (F,nqf,2,3)
            nvec = np.cross(tu[:, :, 0, :], tu[:, :, 1, :])
            ds = np.linalg.norm(nvec, axis=2)
            normal = nvec / ds[:, :, None]
            w = ds * w_ref_f[None, :]
            self.facet_data[tag] = dict(index=idx, facets=facets, fnodes=fnodes,
                                        qp=qp, w=w, normal=normal,
                                        area=w.sum(axis=1))

    # -- P2 plumbing --------------------------------------------------------
    def _facet_nodes(self, facets):
        if self.order == 1:
            return facets
        out = np.empty((len(facets), 6), dtype=int)
        out[:, :3] = facets
        for e, (a, b) in enumerate(_TRI_EDGES):
            keys = np.sort(facets[:, (a, b)], axis=1)
            out[:, 3 + e] = [self._edge_lookup[(int(p), int(q))] for p, q in keys]
        return out

    def _project_boundary_midnodes(self, coords):
        coords = coords.copy()
        mesh = self.mesh
        for tag in (OUTER, CAVITY):
            facets = mesh.facets_with_tag(tag)
            if not len(facets):
                continue
            corner_ids = np.unique(facets)
            center, radius, resid = _fit_sphere(mesh.nodes[corner_ids])
            if resid > 1e-6 * radius:
                continue    # not a sphere; leave the facets straight
            mids = set()
            for e, (a, b) in enumerate(_TRI_EDGES):
                for p, q in np.sort(facets[:, (a, b)], axis=1):
                    mids.add(self._edge_lookup[(int(p), int(q))])
            mids = np.array(sorted(mids), dtype=int)
            v = coords[mids] - center
            coords[mids] = center + radius * v / np.linalg.norm(v, axis=1)[:, None]
        return coords

    # -- generic evaluation helpers ------------------------------------------
    def facet_values(self, nodal, tag):
        """P-order values at the facet rule points: (F, nqf, ...)."""
        fd = self.facet_data[tag]
        return np.einsum("qb,fb...->fq...", self.facet_basis, nodal[fd["fnodes"]])

    def tet_values(self, nodal):
        return np.einsum("qb,tb...->tq...", self.tet_basis, nodal[self.conn])

    def tet_divergence(self, nodal_vec):
        """div of a vector FE field at the tet rule points: (T, nq)."""
        return np.einsum("tqbi,tbi->tq", self.tet_grads, nodal_vec[self.conn])

    # -- load helpers ------------------------------------------------------
    def facet_load_vector(self, tag, traction_qp=None, flux_qp=None):
        """Assemble boundary loads from data sampled at the facet rule points.

        traction_qp: (F,nqf,3); flux_qp: (F,nqf) values of f = -k grad(theta).nu.
        Returns (elastic load (3N,), heat load (N,)); the heat load carries
        the weak form's minus sign.
        """
        n = self.n_nodes
        le = np.zeros(3 * n)
        lh = np.zeros(n)
        if tag not in self.facet_data:
            return le, lh
        fd = self.facet_data[tag]
        fnodes, w = fd["fnodes"], fd["w"]
        if traction_qp is not None:
            contrib = np.einsum("fk,kb,fki->fbi", w, self.facet_basis, traction_qp)
            np.add.at(le.reshape(-1, 3), fnodes.reshape(-1), contrib.reshape(-1, 3))
        if flux_qp is not None:
            contrib = np.einsum("fk,kb,fk->fb", w, self.facet_basis, -flux_qp)
            np.add.at(lh, fnodes.reshape(-1), contrib.reshape(-1))
        return le, lh

    def volume_load_vector(self, body_force=None, heat_source=None):
        """Loads from callables evaluated at the volume rule points."""
        n = self.n_nodes
        le = np.zeros(3 * n)
        lh = np.zeros(n)
        T, nq = self.tet_w.shape
        if body_force is not None:
            vals = body_force(self.tet_qp.reshape(-1, 3)).reshape(T, nq, 3)
            contrib = np.einsum("tk,kb,tki->tbi", self.tet_w, self.tet_basis, vals)
            np.add.at(le.reshape(-1, 3), self.conn.reshape(-1), contrib.reshape(-1, 3))
        if heat_source is not None:
            vals = heat_source(self.tet_qp.reshape(-1, 3)).reshape(T, nq)
            contrib = np.einsum("tk,kb,tk->tb", self.tet_w, self.tet_basis, vals)
            np.add.at(lh, self.conn.reshape(-1), contrib.reshape(-1))
        return le, lh


@dataclass
class TauSolution:
    tau: float
    w: np.ndarray          # (N,3) FE nodal values (corners first)
    xi: np.ndarray         # (N,)
    kind: str              # "total" or "reflected"
    stats: dict = field(default_factory=dict)


@dataclass
class TimeSolution:
    horizon: float
    times: np.ndarray      # (S+1,)
    u: np.ndarray          # (S+1,N,3)
    v: np.ndarray          # (S+1,N,3)
    theta: np.ndarray      # (S+1,N)
    kind: str
    stats: dict = field(default_factory=dict)

    @property
    def terminal(self):
        """(u(T), du/dt(T), theta(T)) nodal snapshot."""
        return self.u[-1], self.v[-1], self.theta[-1]


class TauSolver:
    """Factor-and-solve wrapper for the tau-domain system on one mesh."""

    def __init__(self, mesh, material, blocks=None, order=1):
        self.mesh = mesh
        self.material = material
        self.blocks = blocks if blocks is not None else FemBlocks(mesh, material,
                                                                  order=order)

    def matrix(self, tau):
        mat = self.material
        b = self.blocks
        A11 = b.Ke + mat.rho * tau ** 2 * b.Mv
        A12 = mat.m * b.Bc
        A21 = -mat.m * mat.theta0 * tau * b.Dc
        A22 = mat.k * b.Kh + mat.c * tau * b.Ms
        return sp.bmat([[A11, A12], [A21, A22]], format="csc")

    def _rigid_modes(self):
        X = self.blocks.all_coords
        n = len(X)
        B = np.zeros((3 * n, 6))
        B[0::3, 0] = 1.0
        B[1::3, 1] = 1.0
        B[2::3, 2] = 1.0
        B[0::3, 3] = -X[:, 1]
        B[1::3, 3] = X[:, 0]
        B[1::3, 4] = -X[:, 2]
        B[2::3, 4] = X[:, 1]
        B[0::3, 5] = X[:, 2]
        B[2::3, 5] = -X[:, 0]
        return B

    def _solve_amg(self, tau, rhs):
        """Block-triangular preconditioned GMRES: AMG on the elastic block
        (rigid-body near-nullspace), direct factorization of the small heat
        block.  Deterministic; used for systems too large for sparse LU."""
        import pyamg
        mat = self.material
        b = self.blocks
        n = b.n_nodes
        A11 = (b.Ke + mat.rho * tau ** 2 * b.Mv).tocsr()
        A22 = (mat.k * b.Kh + mat.c * tau * b.Ms).tocsc()
        C12 = (mat.m * b.Bc).tocsr()
        C21 = (-mat.m * mat.theta0 * tau * b.Dc).tocsr()
        ml = pyamg.smoothed_aggregation_solver(A11, B=self._rigid_modes(),
                                               strength="symmetric",
                                               max_coarse=300)
        lu22 = spla.splu(A22)
        A = sp.bmat([[A11, C12], [C21, A22]], format="csr")
        M_u = ml.aspreconditioner(cycle="V")

        def prec(r):
            zt = lu22.solve(r[3 * n:])
            zu = M_u @ (r[:3 * n] - C12 @ zt)
            return np.concatenate([zu, zt])

        M = spla.LinearOperator(A.shape, prec)
        z, info = spla.gmres(A, rhs, M=M, rtol=1e-12, atol=0.0, restart=100,
                             maxiter=600)
        if info != 0:
            raise SolverError(f"amg-gmres failed to converge at tau={tau}")
        return A, z

    def _solve_decoupled(self, tau, rhs, method):
        """m = 0: the blocks are independent; solve them separately."""
        b = self.blocks
        mat = self.material
        n = b.n_nodes
        A11 = (b.Ke + mat.rho * tau ** 2 * b.Mv).tocsc()
        A22 = (mat.k * b.Kh + mat.c * tau * b.Ms).tocsc()
        rhs_u, rhs_t = rhs[:3 * n], rhs[3 * n:]
        if np.any(rhs_t):
            xi = spla.splu(A22).solve(rhs_t)
        else:
            xi = np.zeros(n)
        if np.any(rhs_u):
            if method == "amg" or (method == "auto" and A11.shape[0] > 12000):
                import pyamg
                ml = pyamg.smoothed_aggregation_solver(
                    A11.tocsr(), B=self._rigid_modes(), strength="symmetric",
                    max_coarse=300)
                u, info = ml.solve(rhs_u, tol=1e-13, maxiter=400, accel="cg",
                                   return_info=True)
                if info != 0:
                    raise SolverError(f"amg-cg failed to converge at tau={tau}")
            else:
                u = spla.splu(A11).solve(rhs_u)
        else:
            u = np.zeros(3 * n)
        A = sp.block_diag([A11, A22], format="csr")
        return A, np.concatenate([u, xi])

    def solve(self, tau, loads, kind="total", method="auto"):
        """loads: (elastic (3N,), heat (N,)) assembled right-hand side.

        method: "direct" (sparse LU), "amg" (block-preconditioned GMRES),
        "iterative" (ILU-GMRES fallback), or "auto" (direct below 12k
        unknowns, amg above).
        """
        if tau <= 0:
            raise SolverError("tau must be positive")
        if OUTER not in self.blocks.facet_data:
            raise SolverError("mesh has no outer boundary facets")
        n = self.blocks.n_nodes
        rhs = np.concatenate(loads)
        try:
            if self.material.m == 0.0:
                A, z = self._solve_decoupled(tau, rhs, method)
            elif method == "amg" or (method == "auto" and 4 * n > 12000):
                A, z = self._solve_amg(tau, rhs)
            elif method in ("direct", "auto"):
                A = self.matrix(tau)
                z = spla.splu(A).solve(rhs)
            elif method == "iterative":
                A = self.matrix(tau)
                ilu = spla.spilu(A, drop_tol=1e-8, fill_factor=30)
                M = spla.LinearOperator(A.shape, ilu.solve)
                z, info = spla.gmres(A, rhs, M=M, rtol=1e-12, restart=200, maxiter=2000)
                if info != 0:
                    raise SolverError(f"gmres failed to converge (info={info})")
            else:
                raise ValueError(f"unknown method {method!r}")
        except RuntimeError as exc:
            raise SolverError(f"factorization failed at tau={tau}: {exc}") from exc
        rhs_norm = np.linalg.norm(rhs)
        resid = np.linalg.norm(A @ z - rhs) / rhs_norm if rhs_norm > 0 else 0.0
        if rhs_norm > 0 and resid > 1e-10:
            raise SolverError(f"solve residual {resid:.2e} exceeds 1e-10 at tau={tau}")
        w = z[:3 * n].reshape(n, 3)
        xi = z[3 * n:]
        return TauSolution(tau, w, xi, kind, {"residual": resid, "rhs_norm": rhs_norm})

    # -- probe-driven entries ---------------------------------------------
    def _probe_data(self, probe, tau, tag, sign):
        f = TauProbeField(probe, self.material, tau)
        fd = self.blocks.facet_data[tag]
        qp = fd["qp"].reshape(-1, 3)
        nu = fd["normal"].reshape(-1, 3)
        nqf = fd["qp"].shape[1]
        tr = sign * f.traction(qp, nu).reshape(-1, nqf, 3)
        fl = sign * f.flux(qp, nu).reshape(-1, nqf)
        return self.blocks.facet_load_vector(tag, tr, fl)

    def probe_loads_total(self, probe, tau):
        return self._probe_data(probe, tau, OUTER, +1.0)

    def probe_loads_reflected(self, probe, tau):
        if CAVITY not in self.blocks.facet_data:
            raise SolverError("reflected solve needs cavity facets")
        return self._probe_data(probe, tau, CAVITY, -1.0)


def solve_tau(mesh, material, probe, tau, solver=None, method="direct", order=1):
    """Total-field tau-domain solve with probe data on the outer boundary."""
    s = solver if solver is not None else TauSolver(mesh, material, order=order)
    return s.solve(tau, s.probe_loads_total(probe, tau), kind="total", method=method)


def solve_tau_reflected(mesh, material, probe, tau, solver=None, method="direct",
                        order=1):
    """Reflected-field solve: (R, Sigma) = (w - w0, Xi - Xi0) directly."""
    s = solver if solver is not None else TauSolver(mesh, material, order=order)
    return s.solve(tau, s.probe_loads_reflected(probe, tau), kind="reflected",
                   method=method)


class TimeSolver:
    """Monolithic Newmark(1/4,1/2) + Crank-Nicolson integrator."""

    def __init__(self, mesh, material, horizon, n_steps, blocks=None, order=1):
        if horizon <= 0:
            raise SolverError("horizon must be positive")
        if n_steps < 16:
            raise SolverError("need at least 16 steps")
        self.mesh = mesh
        self.material = material
        self.T = float(horizon)
        self.n_steps = int(n_steps)
        self.dt = self.T / self.n_steps
        self.blocks = blocks if blocks is not None else FemBlocks(mesh, material,
                                                                  order=order)
        mat = material
        b = self.blocks
        dt = self.dt
        self.Mrho = (mat.rho * b.Mv).tocsr()
        A11 = b.Ke + (4.0 / dt ** 2) * self.Mrho
        A12 = mat.m * b.Bc
        A21 = -(mat.m * mat.theta0 / dt) * b.Dc
        A22 = (mat.c / dt) * b.Ms + (mat.k / 2.0) * b.Kh
        self._A = sp.bmat([[A11, A12], [A21, A22]], format="csc")
        self._lu = spla.splu(self._A)
        edges = mesh.nodes[mesh.tets[:, 1:]] - mesh.nodes[mesh.tets[:, :1]]
        hmin = np.min(np.linalg.norm(edges.reshape(-1, 3), axis=1))
        travel = mat.pressure_speed * dt
        self.step_warning = (f"c_p*dt = {travel:.3g} exceeds half the minimum edge "
                             f"{hmin:.3g}; accuracy (not stability) may suffer"
                             if travel > 0.5 * hmin else "")

    def run(self, boundary_data, kind="total"):
        """Integrate with boundary loads from `boundary_data(t) -> (le, lh)`."""
        mat = self.material
        b = self.blocks
        n = b.n_nodes
        dt = self.dt
        S = self.n_steps
        u = np.zeros((S + 1, n, 3))
        v = np.zeros((S + 1, n, 3))
        th = np.zeros((S + 1, n))
        le_prev, lh_prev = boundary_data(0.0)
        a = np.zeros(3 * n)    # zero initial data and admissible loads: a0 = 0
        if np.linalg.norm(le_prev) > 0:
            a = spla.splu(self.Mrho.tocsc()).solve(le_prev)
        Dc = (mat.m * mat.theta0) * b.Dc
        Kh_half = (mat.k / 2.0) * b.Kh
        Ms_dt = (mat.c / dt) * b.Ms
        un = np.zeros(3 * n)
        vn = np.zeros(3 * n)
        thn = np.zeros(n)
        for s in range(S):
            t_next = (s + 1) * dt
            le_next, lh_next = boundary_data(t_next)
            be = le_next + self.Mrho @ ((4.0 / dt ** 2) * un + (4.0 / dt) * vn + a)
            bh = 0.5 * (lh_next + lh_prev) + Ms_dt @ thn - Kh_half @ thn \
                - (1.0 / dt) * (Dc @ un)
            z = self._lu.solve(np.concatenate([be, bh]))
            u_next = z[:3 * n]
            th_next = z[3 * n:]
            a_next = (4.0 / dt ** 2) * (u_next - un - dt * vn) - a
            v_next = (2.0 / dt) * (u_next - un) - vn
            un, vn, thn, a = u_next, v_next, th_next, a_next
            le_prev, lh_prev = le_next, lh_next
            u[s + 1] = un.reshape(n, 3)
            v[s + 1] = vn.reshape(n, 3)
            th[s + 1] = thn
        times = np.linspace(0.0, self.T, S + 1)
        stats = {"dt": dt, "step_warning": self.step_warning}
        return TimeSolution(self.T, times, u, v, th, kind, stats)

    # -- probe-driven data providers ----------------------------------------
    def probe_boundary_data(self, probe, reflected=False):
        f = TimeProbeField(probe, self.material)
        tag = CAVITY if reflected else OUTER
        if tag not in self.blocks.facet_data:
            raise SolverError("requested boundary tag not present in mesh")
        fd = self.blocks.facet_data[tag]
        qp = fd["qp"].reshape(-1, 3)
        nu = fd["normal"].reshape(-1, 3)
        nqf = fd["qp"].shape[1]
        sign = -1.0 if reflected else 1.0

        def data(t):
            tr = sign * f.traction(qp, t, nu).reshape(-1, nqf, 3)
            fl = sign * f.flux(qp, t, nu).reshape(-1, nqf)
            return self.blocks.facet_load_vector(tag, tr, fl)

        return data


def solve_time(mesh, material, probe, horizon, n_steps, solver=None, order=1):
    s = solver if solver is not None else TimeSolver(mesh, material, horizon,
                                                     n_steps, order=order)
    return s.run(s.probe_boundary_data(probe, reflected=False), kind="total")


def solve_time_reflected(mesh, material, probe, horizon, n_steps, solver=None,
                         order=1):
    s = solver if solver is not None else TimeSolver(mesh, material, horizon,
                                                     n_steps, order=order)
    return s.run(s.probe_boundary_data(probe, reflected=True), kind="reflected")


def laplace_weights(times, tau):
    """Trapezoid weights of int_0^T e^{-tau t} ( . ) dt on the step grid."""
    dt = times[1] - times[0]
    w = np.full(len(times), dt)
    w[0] = w[-1] = dt / 2.0
    return w * np.exp(-tau * times)


def _simpson_weights(times):
    n = len(times) - 1
    dt = times[1] - times[0]
    w = np.zeros(len(times))
    if n % 2 == 0:
        w[0] = w[-1] = 1.0
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        w *= dt / 3.0
    else:  # composite Simpson on the even part + trapezoid on the last step
        w[:n] = _simpson_weights(times[:n])
        w[-2] += dt / 2.0
        w[-1] += dt / 2.0
    return w


def laplace_trace(time_solution, tau):
    """Laplace transform of nodal histories over [0, T] by the trapezoid rule.

    Returns (w (N,3), xi (N,), err) with err the max abs difference against
    composite Simpson on the same grid (a quadrature error estimate).
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    t = time_solution.times
    wt = laplace_weights(t, tau)
    ws = _simpson_weights(t) * np.exp(-tau * t)
    w = np.einsum("s,sni->ni", wt, time_solution.u)
    xi = np.einsum("s,sn->n", wt, time_solution.theta)
    w2 = np.einsum("s,sni->ni", ws, time_solution.u)
    xi2 = np.einsum("s,sn->n", ws, time_solution.theta)
    err = max(np.max(np.abs(w - w2)), np.max(np.abs(xi - xi2)))
    return w, xi, float(err)
