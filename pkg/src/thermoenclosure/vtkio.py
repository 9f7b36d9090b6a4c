"""Legacy ASCII VTK writers for field dumps and enclosure grids."""

import numpy as np


def _fmt(v):
    return f"{v:.17g}"


def write_unstructured_vtk(path, mesh, point_vectors=None, point_scalars=None):
    """Legacy VTK unstructured grid: tets + optional nodal fields.

    point_vectors / point_scalars: dicts name -> array ((N,3) / (N,));
    fields defined on richer FE spaces should be restricted to the mesh
    corner nodes before dumping.
    """
    n = mesh.n_nodes
    lines = ["# vtk DataFile Version 3.0", "thermoenclosure field dump",
             "ASCII", "DATASET UNSTRUCTURED_GRID", f"POINTS {n} double"]
    for p in mesh.nodes:
        lines.append(" ".join(_fmt(v) for v in p))
    T = len(mesh.tets)
    lines.append(f"CELLS {T} {5 * T}")
    for t in mesh.tets:
        lines.append("4 " + " ".join(str(i) for i in t))
    lines.append(f"CELL_TYPES {T}")
    lines.extend(["10"] * T)
    wrote_header = False
    for name, arr in (point_vectors or {}).items():
        if not wrote_header:
            lines.append(f"POINT_DATA {n}")
            wrote_header = True
        lines.append(f"VECTORS {name} double")
        for v in np.asarray(arr)[:n]:
            lines.append(" ".join(_fmt(x) for x in v))
    for name, arr in (point_scalars or {}).items():
        if not wrote_header:
            lines.append(f"POINT_DATA {n}")
            wrote_header = True
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        for v in np.asarray(arr)[:n]:
            lines.append(_fmt(v))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_structured_points_vtk(path, region):
    """EnclosureRegion as a legacy VTK structured-points 0/1 exclusion field."""
    nx, ny, nz = region.shape
    sx = (region.box_hi - region.box_lo) / (np.array(region.shape) - 1)
    lines = ["# vtk DataFile Version 3.0", "thermoenclosure exclusion field",
             "ASCII", "DATASET STRUCTURED_POINTS",
             f"DIMENSIONS {nx} {ny} {nz}",
             "ORIGIN " + " ".join(_fmt(v) for v in region.box_lo),
             "SPACING " + " ".join(_fmt(v) for v in sx),
             f"POINT_DATA {nx * ny * nz}",
             "SCALARS excluded int 1",
             "LOOKUP_TABLE default"]
    # VTK structured points vary x fastest
    vals = region.excluded.astype(int).transpose(2, 1, 0).reshape(-1)
    lines.extend(str(v) for v in vals)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
