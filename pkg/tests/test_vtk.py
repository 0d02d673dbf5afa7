import numpy as np
import pytest

from mlcafem import mesh as ms
from mlcafem.vtk import write_vtk


def test_vtk_layout(tmp_path):
    mesh = ms.bisect(ms.initial_mesh(ms.l_shape(), 2), [0])
    u = np.linspace(0, 1, mesh.n_vertices)
    eta = np.arange(mesh.n_elements, dtype=float)
    path = tmp_path / "m.vtk"
    write_vtk(path, mesh, {"u_0": u}, {"eta_sq_0": eta})
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# vtk DataFile")
    assert lines[2] == "ASCII"
    assert lines[3] == "DATASET UNSTRUCTURED_GRID"
    assert lines[4] == f"POINTS {mesh.n_vertices} double"
    i = lines.index(f"CELLS {mesh.n_elements} {4 * mesh.n_elements}")
    first = [int(v) for v in lines[i + 1].split()]
    assert first == [3, *mesh.elements[0]]
    j = lines.index(f"CELL_TYPES {mesh.n_elements}")
    assert set(lines[j + 1 : j + 1 + mesh.n_elements]) == {"5"}
    k = lines.index(f"POINT_DATA {mesh.n_vertices}")
    assert lines[k + 1] == "SCALARS u_0 double 1"
    np.testing.assert_array_equal([float(v) for v in lines[k + 3 : k + 3 + mesh.n_vertices]], u)
    c = lines.index(f"CELL_DATA {mesh.n_elements}")
    np.testing.assert_array_equal([float(v) for v in lines[c + 3 : c + 3 + mesh.n_elements]], eta)


def test_vtk_shape_check(tmp_path):
    mesh = ms.initial_mesh(ms.square(0, 1), 1)
    with pytest.raises(ValueError):
        write_vtk(tmp_path / "x.vtk", mesh, {"u": np.zeros(3)})
    with pytest.raises(ValueError):
        write_vtk(tmp_path / "x.vtk", mesh, cell_data={"e": np.zeros(5)})
