import numpy as np
import pytest

from mlcafem import mesh as ms

ACCEPTANCE_LINES = []


def conformity_audit(mesh):
    """Every interior edge has two active triangles, every boundary edge one,
    and boundary edges are exactly the edges on the domain polygon."""
    edges, _, edge_tris = mesh.edge_data
    counts = (edge_tris >= 0).sum(axis=1)
    assert counts.min() >= 1 and counts.max() <= 2
    mids = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    if mesh.domain is not None:
        on_bdry = mesh.domain.on_boundary(mids)
        np.testing.assert_array_equal(counts == 1, on_bdry)
    # a hanging node would sit on the interior of some active edge
    for (a, b) in edges:
        pa, pb = mesh.vertices[a], mesh.vertices[b]
        d = pb - pa
        rel = (mesh.vertices - pa) @ d / (d @ d)
        perp = np.abs(d[0] * (mesh.vertices[:, 1] - pa[1]) - d[1] * (mesh.vertices[:, 0] - pa[0]))
        inside = (rel > 1e-12) & (rel < 1 - 1e-12) & (perp < 1e-12 * (d @ d))
        assert not inside.any()


def min_angles(mesh):
    c = mesh.corners
    out = np.empty(len(c))
    ang = []
    for i in range(3):
        u = c[:, (i + 1) % 3] - c[:, i]
        v = c[:, (i + 2) % 3] - c[:, i]
        cos = np.einsum("ij,ij->i", u, v) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
        ang.append(np.arccos(np.clip(cos, -1, 1)))
    out[:] = np.min(ang, axis=0)
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def unit_square():
    return ms.initial_mesh(ms.square(0.0, 1.0), 1)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
