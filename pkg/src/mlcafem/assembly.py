"""P1 assembly for a(u, v) = int A grad u . grad v + phi u v and (u, v).

Variable coefficients are sampled at the three edge midpoints of each
element (exact for quadratics), which is also exact when they are constant.
Matrices are assembled over all vertices; :func:`apply_dirichlet` restricts
them to the free vertices.
"""

import numpy as np
import scipy.sparse as sp

from .exceptions import GeometryError
from .quadrature import MIDPOINT, map_points

_MASS_REF = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0


def _check_geometry(mesh):
    if mesh.n_elements and mesh.areas.min() <= 0.0:
        raise GeometryError("non-positive element area")


def _scatter(mesh, local):
    T = mesh.elements
    rows = np.repeat(T, 3, axis=1).ravel()
    cols = np.tile(T, (1, 3)).ravel()
    n = mesh.n_vertices
    return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(n, n))


def element_stiffness(mesh, problem):
    """(nt, 3, 3) local matrices of a(., .)."""
    _check_geometry(mesh)
    x, y = map_points(mesh.corners, MIDPOINT)
    w = MIDPOINT.weights
    area = mesh.areas
    A = np.einsum("q,tqde->tde", w, problem.A(x, y))
    G = mesh.basis_gradients
    local = area[:, None, None] * np.einsum("tid,tde,tje->tij", G, A, G)
    phi = problem.phi(x, y)
    if np.any(phi):
        b = MIDPOINT.points
        local += area[:, None, None] * np.einsum("q,tq,qi,qj->tij", w, phi, b, b)
    return local


def element_mass(mesh):
    _check_geometry(mesh)
    return mesh.areas[:, None, None] * _MASS_REF


def assemble_stiffness(mesh, problem):
    return _scatter(mesh, element_stiffness(mesh, problem))


def assemble_mass(mesh):
    return _scatter(mesh, element_mass(mesh))


def assemble_load(mesh, g, mass=None):
    """Load vector (g, phi_i).

    ``g`` is either a callable ``g(x, y)`` or a nodal vector of a P1
    function on ``mesh`` (prolongate coarse functions first); for the latter
    the result is exactly ``M @ g``.
    """
    if callable(g):
        _check_geometry(mesh)
        x, y = map_points(mesh.corners, MIDPOINT)
        vals = np.asarray(g(x, y), dtype=float) * np.ones_like(x)
        local = mesh.areas[:, None] * np.einsum("q,tq,qi->ti", MIDPOINT.weights, vals, MIDPOINT.points)
        return np.bincount(mesh.elements.ravel(), weights=local.ravel(), minlength=mesh.n_vertices)
    g = np.asarray(g, dtype=float)
    if g.shape != (mesh.n_vertices,):
        raise ValueError(f"nodal vector has shape {g.shape}, mesh has {mesh.n_vertices} vertices")
    if mass is None:
        mass = assemble_mass(mesh)
    return mass @ g


def apply_dirichlet(obj, boundary):
    """Restrict a matrix (rows and columns) or a vector to the free vertices.

    ``boundary`` is a boolean mask over vertices.
    """
    free = np.flatnonzero(~np.asarray(boundary, dtype=bool))
    if sp.issparse(obj):
        return obj.tocsr()[free][:, free].tocsr()
    obj = np.asarray(obj)
    if obj.ndim == 2:
        return obj[np.ix_(free, free)]
    return obj[free]


def expand(boundary, x_free):
    """Re-insert zeros on the boundary vertices."""
    boundary = np.asarray(boundary, dtype=bool)
    out = np.zeros(boundary.shape + np.shape(x_free)[1:])
    out[~boundary] = x_free
    return out
