"""Benchmark geometry: nested-ball scenes, shell meshes, distances, patches.

The mesh generator builds a tetrahedral mesh of the region between two
spheres (or of a full ball when there is no cavity) from radially blended
icosphere shells, splitting each triangular prism into three tets with the
global-min-vertex rule so neighbouring prisms stay conforming.  Boundary
facets are stored oriented so the right-hand normal points out of the
meshed material: outward on the outer sphere, into the cavity on the
cavity sphere.
"""

import os
from dataclasses import dataclass, field

import numpy as np

from .quadrature import tet_volumes

OUTER = 1
CAVITY = 2


@dataclass(frozen=True)
class Ball:
    center: tuple
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))
        if self.radius <= 0:
            raise ValueError("ball radius must be positive")

    @property
    def c(self):
        return np.asarray(self.center, dtype=float)


@dataclass(frozen=True)
class Scene:
    """The body (outer ball), an optional cavity ball strictly inside it."""
    outer: Ball
    cavity: Ball | None = None

    def __post_init__(self):
        if self.cavity is not None:
            gap = self.outer.radius - self.cavity.radius \
                - np.linalg.norm(self.outer.c - self.cavity.c)
            if gap <= 0:
                raise ValueError("cavity must lie strictly inside the outer ball")

    def validate_probe_ball(self, ball):
        """B must satisfy closure(B) disjoint from closure(Omega)."""
        if np.linalg.norm(ball.c - self.outer.c) <= self.outer.radius + ball.radius:
            raise ValueError("probe ball intersects the closure of the body")


def set_distance(scene, probe_ball):
    """Exact (dist(D,B), dist(Omega,B)) for ball-described sets."""
    d_omega = np.linalg.norm(scene.outer.c - probe_ball.c) \
        - scene.outer.radius - probe_ball.radius
    if d_omega <= 0:
        raise ValueError("probe ball overlaps the body")
    if scene.cavity is None:
        return np.inf, float(d_omega)
    d_cav = np.linalg.norm(scene.cavity.c - probe_ball.c) \
        - scene.cavity.radius - probe_ball.radius
    if d_cav <= 0:
        raise ValueError("probe ball overlaps the cavity")
    return float(d_cav), float(d_omega)


@dataclass
class Mesh:
    nodes: np.ndarray                  # (N,3)
    tets: np.ndarray                   # (T,4) int
    boundary_facets: np.ndarray        # (F,3) int, oriented
    boundary_tags: np.ndarray          # (F,) int, OUTER or CAVITY
    shells: list = field(default_factory=list)   # [(radius_hint, node_idx array)]

    @property
    def n_nodes(self):
        return len(self.nodes)

    def volumes(self):
        return tet_volumes(self.nodes, self.tets)

    def facets_with_tag(self, tag):
        return self.boundary_facets[self.boundary_tags == tag]

    def facet_areas_normals(self):
        tri = self.nodes[self.boundary_facets]
        nvec = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        area = 0.5 * np.linalg.norm(nvec, axis=1)
        return area, nvec / (2.0 * area)[:, None]

    def facet_centroids(self):
        return self.nodes[self.boundary_facets].mean(axis=1)

    def boundary_nodes(self, tag=None):
        if tag is None:
            return np.unique(self.boundary_facets)
        return np.unique(self.facets_with_tag(tag))

    def validate(self):
        """Positive volumes, index sanity, watertight tagged boundary."""
        if self.tets.min() < 0 or self.tets.max() >= self.n_nodes:
            raise ValueError("dangling index in tets")
        if len(self.boundary_facets) and (self.boundary_facets.min() < 0
                                          or self.boundary_facets.max() >= self.n_nodes):
            raise ValueError("dangling index in boundary facets")
        vols = self.volumes()
        if np.any(vols <= 0):
            raise ValueError(f"{np.sum(vols <= 0)} nonpositive tet volumes")
        for tag in (OUTER, CAVITY):
            facets = self.facets_with_tag(tag)
            if not len(facets):
                continue
            edges = {}
            for f in facets:
                for a, b in ((f[0], f[1]), (f[1], f[2]), (f[2], f[0])):
                    key = (min(a, b), max(a, b))
                    edges[key] = edges.get(key, 0) + 1
            if any(v != 2 for v in edges.values()):
                raise ValueError(f"boundary with tag {tag} is not watertight")
        return self


# -- icosphere ------------------------------------------------------------

def icosphere(level):
    """Unit icosphere: (vertices, faces); faces CCW seen from outside."""
    t = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array([
        [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
        [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
        [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1]], dtype=float)
    verts /= np.linalg.norm(verts, axis=1)[:, None]
    faces = [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1]]
    verts = [v for v in verts]
    for _ in range(level):
        cache = {}

        def midpoint(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        faces = new_faces
    return np.array(verts), np.array(faces, dtype=int)


def _split_prism(bot, top):
    """Three tets for the prism between matching triangles (min-vertex rule).

    bot/top are triples of global indices with top[i] paired above bot[i];
    the quad diagonals this produces depend only on the shared edge, so
    adjacent prisms conform.
    """
    order = np.argsort(bot)
    b = [bot[i] for i in order]
    t = [top[i] for i in order]
    return [
        (b[0], b[1], b[2], t[2]),
        (b[0], b[1], t[2], t[1]),
        (b[0], t[1], t[2], t[0]),
    ]


def _fix_orientation(nodes, tets):
    tets = np.asarray(tets, dtype=int)
    flip = tet_volumes(nodes, tets) < 0
    if np.any(flip):
        tets[flip] = tets[flip][:, [0, 1, 3, 2]]
    return tets


def generate_benchmark_mesh(scene, refinement=0, layer_factor=2.0, grade=1.0,
                            n_layers=None):
    """Tetrahedral mesh of Omega \\ closure(D) (or the full ball).

    refinement level l uses the icosphere with 20*4^l facets per sphere;
    radial layer count follows the surface edge length (scaled by
    layer_factor, default 2: the tau-domain fields decay radially, so the
    radial direction is kept finer than the surface), with at least 2
    layers between cavity and outer sphere.  grade > 1 makes consecutive
    layer thicknesses grow geometrically away from the cavity surface,
    where the reflected fields have their exponential boundary layer.
    """
    if refinement < 0:
        raise ValueError("refinement level must be >= 0")
    verts, faces = icosphere(refinement)
    n_shell = len(verts)
    edge = 1.0515 / 2.0 ** refinement * scene.outer.radius  # icosahedron edge
    has_cavity = scene.cavity is not None

    if has_cavity:
        gap = scene.outer.radius - scene.cavity.radius \
            - np.linalg.norm(scene.outer.c - scene.cavity.c)
        if n_layers is None:
            n_layers = max(2, int(np.ceil(layer_factor * gap / edge)))
        if gap < 0.05 * scene.outer.radius:
            raise ValueError("cavity too close to the outer boundary to fit 2 layers")
        steps = grade ** np.arange(n_layers)
        ts = np.concatenate([[0.0], np.cumsum(steps)]) / np.sum(steps)
        nodes = []
        shells = []
        for s, t in enumerate(ts):
            ctr = (1.0 - t) * scene.cavity.c + t * scene.outer.c
            rad = (1.0 - t) * scene.cavity.radius + t * scene.outer.radius
            nodes.append(ctr[None, :] + rad * verts)
            shells.append((rad, np.arange(s * n_shell, (s + 1) * n_shell)))
        nodes = np.concatenate(nodes)
        tets = []
        for s in range(n_layers):
            base = s * n_shell
            for f in faces:
                bot = tuple(base + f)
                top = tuple(base + n_shell + f)
                tets.extend(_split_prism(bot, top))
        tets = _fix_orientation(nodes, np.array(tets, dtype=int))
        outer_base = n_layers * n_shell
        bf = [outer_base + faces, faces[:, [0, 2, 1]]]
        tags = [np.full(len(faces), OUTER), np.full(len(faces), CAVITY)]
        mesh = Mesh(nodes, tets, np.concatenate(bf), np.concatenate(tags), shells)
    else:
        if n_layers is None:
            n_layers = max(2, int(np.ceil(layer_factor * scene.outer.radius / edge)))
        radii = scene.outer.radius * np.arange(1, n_layers + 1) / n_layers
        nodes = []
        shells = []
        for s, rad in enumerate(radii):
            nodes.append(scene.outer.c[None, :] + rad * verts)
            shells.append((rad, np.arange(s * n_shell, (s + 1) * n_shell)))
        center_idx = n_layers * n_shell
        nodes = np.concatenate(nodes + [scene.outer.c[None, :]])
        tets = [(center_idx, f[0], f[1], f[2]) for f in faces]
        for s in range(n_layers - 1):
            base = s * n_shell
            for f in faces:
                bot = tuple(base + f)
                top = tuple(base + n_shell + f)
                tets.extend(_split_prism(bot, top))
        tets = _fix_orientation(nodes, np.array(tets, dtype=int))
        outer_base = (n_layers - 1) * n_shell
        bf = outer_base + faces
        tags = np.full(len(faces), OUTER)
        mesh = Mesh(nodes, tets, bf, tags, shells)
    return mesh.validate()


def boundary_patch(mesh, probe_ball, M):
    """Indices of OUTER facets with centroid distance to the ball below M."""
    if M <= 0:
        raise ValueError("M must be positive")
    idx = np.where(mesh.boundary_tags == OUTER)[0]
    ctr = mesh.nodes[mesh.boundary_facets[idx]].mean(axis=1)
    dist = np.linalg.norm(ctr - probe_ball.c[None, :], axis=1) - probe_ball.radius
    return idx[dist < M]


# -- plain ASCII mesh format ----------------------------------------------

def save_mesh(mesh, path):
    """tetmesh 1 format: counts, nodes (17 sig digits), tets, tagged facets."""
    lines = ["tetmesh 1",
             f"{mesh.n_nodes} {len(mesh.tets)} {len(mesh.boundary_facets)}"]
    for p in mesh.nodes:
        lines.append(f"{p[0]:.17g} {p[1]:.17g} {p[2]:.17g}")
    for t in mesh.tets:
        lines.append(f"{t[0]} {t[1]} {t[2]} {t[3]}")
    for f, tag in zip(mesh.boundary_facets, mesh.boundary_tags):
        lines.append(f"{f[0]} {f[1]} {f[2]} {tag}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_mesh(path):
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if lines[0] != "tetmesh 1":
        raise ValueError("not a tetmesh 1 file")
    n_nodes, n_tets, n_bf = (int(v) for v in lines[1].split())
    if len(lines) != 2 + n_nodes + n_tets + n_bf:
        raise ValueError("malformed counts")
    nodes = np.array([[float(v) for v in ln.split()] for ln in lines[2:2 + n_nodes]])
    tets = np.array([[int(v) for v in ln.split()]
                     for ln in lines[2 + n_nodes:2 + n_nodes + n_tets]], dtype=int)
    raw = [[int(v) for v in ln.split()] for ln in lines[2 + n_nodes + n_tets:]]
    facets = np.array([r[:3] for r in raw], dtype=int) if raw else np.zeros((0, 3), int)
    tags = np.array([r[3] for r in raw], dtype=int) if raw else np.zeros(0, int)
    if len(tags) and not np.all(np.isin(tags, (OUTER, CAVITY))):
        raise ValueError("untagged or mis-tagged boundary facet")
    mesh = Mesh(nodes, tets, facets, tags)
    if (len(tets) and (tets.min() < 0 or tets.max() >= n_nodes)) or \
       (len(facets) and (facets.min() < 0 or facets.max() >= n_nodes)):
        raise ValueError("dangling index")
    return mesh
