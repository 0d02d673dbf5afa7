"""Residual a posteriori indicators and data oscillation for P1 functions.

For an element T the squared indicator is

    h_T^2 ||R_T||_{0,T}^2 + sum_E h_E ||J_E||_{0,E}^2,

with R_T = source + div(A grad u_h) - phi u_h (source = lambda_h u_h for the
eigenproblem, f for the source problem) and J_E the normal jump of
A grad u_h over interior edges of T. On a P1 element div(A grad u_h)
reduces to divA . grad u_h. Boundary edges carry no jump.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError
from .quadrature import DEGREE4, DEGREE5, GAUSS2, MIDPOINT, map_points


@dataclass
class IndicatorField:
    residual_part: np.ndarray
    jump_part: np.ndarray

    @property
    def eta_sq(self):
        return self.residual_part + self.jump_part

    @property
    def total(self):
        """Squared global estimator eta^2(Omega)."""
        return float(np.sum(self.eta_sq))

    @property
    def eta(self):
        return float(np.sqrt(self.total))

    def __add__(self, other):
        return IndicatorField(self.residual_part + other.residual_part, self.jump_part + other.jump_part)


@dataclass
class OscillationField:
    values: np.ndarray

    @property
    def total(self):
        return float(np.sum(self.values))

    @property
    def osc(self):
        return float(np.sqrt(self.total))


def gradients(mesh, u):
    """Element-wise constant gradient of a P1 function, shape (nt, 2)."""
    return np.einsum("ti,tid->td", np.asarray(u)[mesh.elements], mesh.basis_gradients)


def _divA(problem, x, y):
    if problem.divA is None:
        if not problem.constant_A:
            raise ConfigurationError(f"{problem.name}: variable A needs an analytic divA")
        return np.zeros(np.shape(x) + (2,))
    return problem.divA(x, y)


def _jump_part(mesh, problem, grad):
    edges, _, edge_tris = mesh.edge_data
    inner = edge_tris[:, 1] >= 0
    tp, tm = edge_tris[inner, 0], edge_tris[inner, 1]
    p = mesh.vertices[edges[inner, 0]]
    d = mesh.vertices[edges[inner, 1]] - p
    length = np.linalg.norm(d, axis=1)
    nu = np.column_stack([d[:, 1], -d[:, 0]]) / length[:, None]
    s = GAUSS2.points
    x = p[:, None, 0] + s[None, :] * d[:, None, 0]
    y = p[:, None, 1] + s[None, :] * d[:, None, 1]
    A = problem.A(x, y)
    dg = grad[tp] - grad[tm]
    j = np.einsum("egab,eb,ea->eg", A, dg, nu)
    contrib = length * length * np.einsum("g,eg->e", GAUSS2.weights, j * j)
    nt = mesh.n_elements
    return np.bincount(tp, contrib, minlength=nt) + np.bincount(tm, contrib, minlength=nt)


def _indicators(mesh, problem, u, source):
    u = np.asarray(u, dtype=float)
    grad = gradients(mesh, u)
    x, y = map_points(mesh.corners, MIDPOINT)
    uq = np.einsum("qi,ti->tq", MIDPOINT.points, u[mesh.elements])
    R = source(x, y, uq) + np.einsum("tqd,td->tq", _divA(problem, x, y), grad) - problem.phi(x, y) * uq
    h = mesh.diameters
    residual = h * h * mesh.areas * np.einsum("q,tq->t", MIDPOINT.weights, R * R)
    return IndicatorField(residual, _jump_part(mesh, problem, grad))


def eigen_indicators(mesh, problem, pair):
    """Indicators of an eigenpair (``pair.lam``, nodal vector ``pair.u``)."""
    lam = float(pair.lam)
    return _indicators(mesh, problem, pair.u, lambda x, y, uq: lam * uq)


def bvp_indicators(mesh, problem, u_h, f):
    """Indicators for the source problem L u = f; ``f`` is a callable
    ``f(x, y)`` or a nodal P1 vector on ``mesh``."""
    if callable(f):
        def source(x, y, uq):
            return np.asarray(f(x, y), dtype=float) * np.ones_like(x)
    else:
        fq = np.einsum("qi,ti->tq", MIDPOINT.points, np.asarray(f, dtype=float)[mesh.elements])

        def source(x, y, uq):
            return fq
    return _indicators(mesh, problem, u_h, source)


def _projector(degree, rule):
    lam = rule.points
    if degree == 0:
        B = np.ones((len(lam), 1))
    elif degree == 1:
        B = lam
    else:
        raise ValueError("oscillation supports projection degree 0 or 1")
    W = np.diag(rule.weights)
    return B @ np.linalg.solve(B.T @ W @ B, B.T @ W)


def oscillation(mesh, g, degree=1):
    """Per-element h_T^2 ||g - Pi_m g||_{0,T}^2 with Pi_m the L2 projection
    onto polynomials of degree ``degree`` (0 or 1).

    ``g(x, y)`` receives arrays of shape (nt, nq) whose row t belongs to
    active element t, so element-wise data can be supplied directly.
    """
    if degree < 0:
        raise ValueError("degree must be nonnegative")
    rule = DEGREE4
    x, y = map_points(mesh.corners, rule)
    vals = np.asarray(g(x, y), dtype=float) * np.ones_like(x)
    diff = vals - vals @ _projector(degree, rule).T
    h = mesh.diameters
    return OscillationField(h * h * mesh.areas * ((diff * diff) @ rule.weights))


def operator_oscillation(mesh, problem, u, degree=1, source=None):
    """osc(L u_h) with L u_h = -divA . grad u_h + phi u_h on each element,
    or osc(source - L u_h) when a callable ``source(x, y)`` is given."""
    u = np.asarray(u, dtype=float)
    grad = gradients(mesh, u)
    ue = u[mesh.elements]
    rule = DEGREE4
    uq = ue @ rule.points.T

    def Lu(x, y):
        val = -np.einsum("tqd,td->tq", _divA(problem, x, y), grad) + problem.phi(x, y) * uq
        return val if source is None else source(x, y) - val

    return oscillation(mesh, Lu, degree)


def energy_error(mesh, problem, u_h, grad_exact, u_exact=None):
    """||u - u_h||_a by a degree-5 rule on every element.

    ``grad_exact(x, y)`` returns shape (..., 2); ``u_exact`` is needed only
    when the problem has a potential.
    """
    rule = DEGREE5
    x, y = map_points(mesh.corners, rule)
    ge = grad_exact(x, y) - gradients(mesh, u_h)[:, None, :]
    dens = np.einsum("tqa,tqab,tqb->tq", ge, problem.A(x, y), ge)
    phi = problem.phi(x, y)
    if np.any(phi):
        if u_exact is None:
            raise ValueError("u_exact is required when phi is nonzero")
        eu = u_exact(x, y) - np.asarray(u_h)[mesh.elements] @ rule.points.T
        dens = dens + phi * eu * eu
    return float(np.sqrt(np.sum(mesh.areas * (dens @ rule.weights))))
