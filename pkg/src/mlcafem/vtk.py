"""Legacy ASCII VTK export of a mesh level (unstructured grid of triangles)."""

import numpy as np

_TRIANGLE = 5


def write_vtk(path, mesh, point_data=None, cell_data=None, title="mlcafem mesh"):
    """Write ``mesh`` with optional nodal fields (length n_vertices) and
    element fields (length n_elements), given as ``{name: array}``."""
    point_data = point_data or {}
    cell_data = cell_data or {}
    nv, nt = mesh.n_vertices, mesh.n_elements
    for name, arr in point_data.items():
        if np.shape(arr) != (nv,):
            raise ValueError(f"point field {name!r} has shape {np.shape(arr)}, expected ({nv},)")
    for name, arr in cell_data.items():
        if np.shape(arr) != (nt,):
            raise ValueError(f"cell field {name!r} has shape {np.shape(arr)}, expected ({nt},)")

    lines = ["# vtk DataFile Version 3.0", title.replace("\n", " "), "ASCII", "DATASET UNSTRUCTURED_GRID"]
    lines.append(f"POINTS {nv} double")
    lines += [f"{x:.17g} {y:.17g} 0" for x, y in mesh.vertices]
    lines.append(f"CELLS {nt} {4 * nt}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.elements]
    lines.append(f"CELL_TYPES {nt}")
    lines += [str(_TRIANGLE)] * nt
    for header, fields, n in (("POINT_DATA", point_data, nv), ("CELL_DATA", cell_data, nt)):
        if not fields:
            continue
        lines.append(f"{header} {n}")
        for name, arr in fields.items():
            lines.append(f"SCALARS {name.replace(' ', '_')} double 1")
            lines.append("LOOKUP_TABLE default")
            lines += [f"{v:.17g}" for v in np.asarray(arr, dtype=float)]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
