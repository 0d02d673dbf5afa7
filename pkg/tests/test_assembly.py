import numpy as np
import pytest
import scipy.sparse.linalg as spla
from dataclasses import replace

from mlcafem import assembly as asm, mesh as ms
from mlcafem.exceptions import GeometryError
from mlcafem.problems import example3, get_problem, oracle_square

RIGHT = ms.from_arrays([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], [[0, 1, 2]])


def _laplace(scale=1.0, phi=None, domain=None):
    p = oracle_square()
    kw = dict(A=lambda x, y: np.broadcast_to(scale * np.eye(2), np.shape(x) + (2, 2)))
    if phi is not None:
        kw["phi"] = phi
    if domain is not None:
        kw["domain"] = domain
    return replace(p, **kw)


def _local_in_vertex_order(mesh, local, coords):
    """Reorder an element matrix to the order of the given vertex coordinates."""
    idx = [int(np.flatnonzero(np.all(mesh.corners[0] == c, axis=1))[0]) for c in coords]
    return local[np.ix_(idx, idx)]


def test_right_triangle_stiffness():
    K = asm.element_stiffness(RIGHT, _laplace())[0]
    K = _local_in_vertex_order(RIGHT, K, [[0, 0], [1, 0], [0, 1]])
    expected = np.array([[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]])
    np.testing.assert_allclose(K, expected, atol=1e-12)


def test_stiffness_linear_in_A():
    K1 = asm.element_stiffness(RIGHT, _laplace())
    K2 = asm.element_stiffness(RIGHT, _laplace(2.0))
    np.testing.assert_allclose(K2, 2 * K1, atol=1e-12)


def test_right_triangle_mass():
    M = asm.element_mass(RIGHT)[0]
    np.testing.assert_allclose(np.diag(M), 1 / 12, atol=1e-12)
    np.testing.assert_allclose(M[~np.eye(3, dtype=bool)], 1 / 24, atol=1e-12)


def test_unit_potential_adds_mass_matrix():
    phi1 = lambda x, y: np.ones_like(np.asarray(x, dtype=float))
    K = asm.element_stiffness(RIGHT, _laplace(phi=phi1))[0] - asm.element_stiffness(RIGHT, _laplace())[0]
    np.testing.assert_allclose(K, asm.element_mass(RIGHT)[0], atol=1e-12)


def test_variable_A_quadratic_exact():
    # A = (1 + x^2) I on the right triangle: int (1+x^2) = 1/2 + 1/12
    prob = replace(
        oracle_square(),
        A=lambda x, y: (1 + np.asarray(x) ** 2)[..., None, None] * np.eye(2),
        constant_A=False,
        divA=lambda x, y: np.stack([2 * np.asarray(x), 0 * np.asarray(y)], -1),
    )
    K = asm.element_stiffness(RIGHT, prob)[0]
    K = _local_in_vertex_order(RIGHT, K, [[0, 0], [1, 0], [0, 1]])
    G = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    expected = (0.5 + 1 / 12) * G @ G.T
    np.testing.assert_allclose(K, expected, atol=1e-12)


def test_global_properties():
    mesh = ms.initial_mesh(ms.l_shape(), 4)
    K = asm.assemble_stiffness(mesh, get_problem("example2"))
    M = asm.assemble_mass(mesh)
    assert abs(K - K.T).max() == 0
    assert abs(M - M.T).max() == 0
    np.testing.assert_allclose(K @ np.ones(mesh.n_vertices), 0.0, atol=1e-12)
    assert np.ones(mesh.n_vertices) @ M @ np.ones(mesh.n_vertices) == pytest.approx(3.0, abs=1e-12)
    Kr = asm.apply_dirichlet(K, mesh.boundary)
    smallest = spla.eigsh(Kr, k=1, sigma=0, which="LM")[0][0]
    assert smallest > 0


def test_load_vectors():
    mesh = ms.initial_mesh(ms.square(0, 1), 3)
    zero = asm.assemble_load(mesh, lambda x, y: 0 * x)
    assert not zero.any()
    assert asm.assemble_load(mesh, lambda x, y: 1.0).sum() == pytest.approx(1.0, abs=1e-12)
    u = np.random.default_rng(0).standard_normal(mesh.n_vertices)
    M = asm.assemble_mass(mesh)
    np.testing.assert_array_equal(asm.assemble_load(mesh, u, mass=M), M @ u)
    with pytest.raises(ValueError):
        asm.assemble_load(mesh, np.ones(mesh.n_vertices + 1))


def test_dirichlet_reduction():
    tri = ms.from_arrays([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]])
    K = asm.assemble_stiffness(tri, _laplace())
    assert asm.apply_dirichlet(K, tri.boundary).shape == (0, 0)
    for n in (2, 4, 7):
        mesh = ms.initial_mesh(ms.square(0, 1), n)
        Kr = asm.apply_dirichlet(asm.assemble_stiffness(mesh, _laplace()), mesh.boundary)
        assert Kr.shape == ((n - 1) ** 2, (n - 1) ** 2)
        assert abs(Kr - Kr.T).max() == 0
    x = np.arange(mesh.n_dofs, dtype=float)
    full = asm.expand(mesh.boundary, x)
    assert not full[mesh.boundary].any()
    np.testing.assert_array_equal(asm.apply_dirichlet(full, mesh.boundary), x)


def test_negative_area_rejected():
    mesh = ms.initial_mesh(ms.square(0, 1), 1)
    flipped = replace(mesh, triangles=mesh.triangles[:, [0, 2, 1]])
    with pytest.raises(GeometryError):
        asm.assemble_mass(flipped)


def test_variable_coefficient_manufactured_solution():
    # -div(A grad u) + phi u = f with the variable-coefficient data on the
    # unit square; the energy error must halve with h
    from mlcafem.estimator import energy_error

    prob = replace(example3(), domain=ms.square(0, 1))
    pi = np.pi
    u = lambda x, y: np.sin(pi * x) * np.sin(pi * y)

    def gu(x, y):
        return np.stack([pi * np.cos(pi * x) * np.sin(pi * y), pi * np.sin(pi * x) * np.cos(pi * y)], -1)

    def f(x, y):
        H = np.empty(np.shape(x) + (2, 2))
        H[..., 0, 0] = H[..., 1, 1] = -pi * pi * u(x, y)
        H[..., 0, 1] = H[..., 1, 0] = pi * pi * np.cos(pi * x) * np.cos(pi * y)
        div = np.einsum("...d,...d", prob.divA(x, y), gu(x, y)) + np.einsum("...ab,...ab", prob.A(x, y), H)
        return -div + prob.phi(x, y) * u(x, y)

    errs = []
    for n in (8, 16, 32):
        mesh = ms.initial_mesh(prob.domain, n)
        K = asm.apply_dirichlet(asm.assemble_stiffness(mesh, prob), mesh.boundary)
        b = asm.apply_dirichlet(asm.assemble_load(mesh, f), mesh.boundary)
        uh = asm.expand(mesh.boundary, spla.spsolve(K.tocsc(), b))
        errs.append(energy_error(mesh, prob, uh, gu, u))
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    assert np.all((ratios > 1.9) & (ratios < 2.1))
