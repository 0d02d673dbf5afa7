"""Conforming triangular meshes refined by newest-vertex bisection.

Every triangle is stored as ``(v0, v1, v2)`` in counterclockwise order with
``v0`` the newest vertex; its refinement edge is ``v1 - v2``. Local edge ``j``
of a triangle is the edge opposite local vertex ``j``, so the refinement edge
is always local edge 0.

Refinement is append-only: a bisected triangle stays in ``Mesh.triangles``
(the genealogy) and only leaves ``Mesh.active``. Vertices are appended too,
and each new vertex remembers the two endpoints of the edge it bisects, which
is all that is needed to prolongate coarse P1 functions exactly.

Element-wise arrays (indicators, marks, ...) are indexed by position in
``Mesh.active`` throughout the package.
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .exceptions import ConfigurationError, GeometryError, HierarchyError

_REL_TOL = 1e-14


class Vertex(NamedTuple):
    x: float
    y: float
    boundary_flag: bool


class Triangle(NamedTuple):
    v: tuple
    parent: int | None
    generation: int


@dataclass(frozen=True)
class DomainDef:
    """Polygonal domain: ``square`` (a, b)^2 or the ``l_shape``
    (-1, 1)^2 minus [0, 1) x (-1, 0]."""

    kind: str
    a: float = 0.0
    b: float = 1.0

    def __post_init__(self):
        if self.kind not in ("square", "l_shape"):
            raise ConfigurationError(f"unsupported domain kind {self.kind!r}")
        if self.kind == "square" and not self.a < self.b:
            raise ConfigurationError("square domain needs a < b")

    @property
    def polygon(self):
        """Corner coordinates, counterclockwise."""
        if self.kind == "square":
            a, b = self.a, self.b
            return np.array([[a, a], [b, a], [b, b], [a, b]], dtype=float)
        return np.array([[-1, -1], [0, -1], [0, 0], [1, 0], [1, 1], [-1, 1]], dtype=float)

    @property
    def edges(self):
        p = self.polygon
        return np.stack([p, np.roll(p, -1, axis=0)], axis=1)

    @property
    def area(self):
        x, y = self.polygon.T
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    @property
    def diameter(self):
        p = self.polygon
        return float(np.max(np.linalg.norm(p[:, None] - p[None], axis=2)))

    def on_boundary(self, xy, tol=1e-12):
        """True for points lying on one of the polygon edges."""
        xy = np.atleast_2d(np.asarray(xy, dtype=float))
        tol = tol * self.diameter
        hit = np.zeros(len(xy), dtype=bool)
        for p, q in self.edges:
            d = q - p
            L2 = d @ d
            s = np.clip(((xy - p) @ d) / L2, 0.0, 1.0)
            dist = np.linalg.norm(xy - (p + s[:, None] * d), axis=1)
            hit |= dist <= tol
        return hit

    def contains(self, xy, tol=1e-12):
        """Closed-domain membership test."""
        xy = np.atleast_2d(np.asarray(xy, dtype=float))
        x, y = xy.T
        eps = tol * self.diameter
        if self.kind == "square":
            lo, hi = self.a - eps, self.b + eps
            return (x >= lo) & (x <= hi) & (y >= lo) & (y <= hi)
        box = (np.abs(x) <= 1 + eps) & (np.abs(y) <= 1 + eps)
        notch = (x > eps) & (y < -eps)
        return box & ~notch


def square(a=0.0, b=1.0):
    return DomainDef("square", a, b)


def l_shape():
    return DomainDef("l_shape", -1.0, 1.0)


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray
    boundary: np.ndarray
    vertex_parents: np.ndarray
    triangles: np.ndarray
    parent: np.ndarray
    generation: np.ndarray
    active: np.ndarray
    domain: DomainDef | None = field(default=None)

    # -- sizes -------------------------------------------------------------
    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_elements(self):
        return len(self.active)

    @property
    def n_dofs(self):
        return int(np.count_nonzero(~self.boundary))

    @cached_property
    def free(self):
        """Indices of vertices carrying a degree of freedom."""
        return np.flatnonzero(~self.boundary)

    @cached_property
    def elements(self):
        return self.triangles[self.active]

    @cached_property
    def corners(self):
        return self.vertices[self.elements]

    # -- geometry ----------------------------------------------------------
    @cached_property
    def areas(self):
        c = self.corners
        d1 = c[:, 1] - c[:, 0]
        d2 = c[:, 2] - c[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @cached_property
    def edge_vectors(self):
        """(nt, 3, 2): local edge j runs from vertex j+1 to vertex j+2."""
        c = self.corners
        return np.stack([c[:, 2] - c[:, 1], c[:, 0] - c[:, 2], c[:, 1] - c[:, 0]], axis=1)

    @cached_property
    def edge_lengths(self):
        return np.linalg.norm(self.edge_vectors, axis=2)

    @cached_property
    def diameters(self):
        return self.edge_lengths.max(axis=1)

    @cached_property
    def outward_normals(self):
        d = self.edge_vectors
        return np.stack([d[..., 1], -d[..., 0]], axis=-1) / self.edge_lengths[..., None]

    @cached_property
    def basis_gradients(self):
        """(nt, 3, 2) gradients of the three barycentric hat functions."""
        d = self.edge_vectors
        rot = np.stack([-d[..., 1], d[..., 0]], axis=-1)
        return rot / (2.0 * self.areas[:, None, None])

    # -- topology ----------------------------------------------------------
    @cached_property
    def edge_data(self):
        """(edges, tri_edges, edge_tris).

        ``edges`` (ne, 2) sorted vertex pairs, ``tri_edges`` (nt, 3) edge
        index of local edge j, ``edge_tris`` (ne, 2) incident active
        triangles (positions in ``active``), -1 in the second slot for
        boundary edges.
        """
        T = self.elements
        nt = len(T)
        e = np.stack([T[:, [1, 2]], T[:, [2, 0]], T[:, [0, 1]]], axis=1).reshape(-1, 2)
        e.sort(axis=1)
        key = e[:, 0].astype(np.int64) * self.n_vertices + e[:, 1]
        ukey, first, inv = np.unique(key, return_index=True, return_inverse=True)
        edges = e[first]
        tri_edges = inv.reshape(nt, 3)
        counts = np.bincount(inv, minlength=len(ukey))
        if np.any(counts > 2):
            raise GeometryError("edge shared by more than two triangles")
        owner = np.repeat(np.arange(nt), 3)
        order = np.argsort(inv, kind="stable")
        starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
        edge_tris = np.full((len(ukey), 2), -1, dtype=np.int64)
        edge_tris[:, 0] = owner[order[starts]]
        two = counts == 2
        edge_tris[two, 1] = owner[order[starts[two] + 1]]
        return edges, tri_edges, edge_tris

    def edge_map(self):
        """Dictionary ``(a, b) -> [triangles]`` over active triangles."""
        edges, _, edge_tris = self.edge_data
        return {
            (int(a), int(b)): [int(t) for t in ts if t >= 0]
            for (a, b), ts in zip(edges, edge_tris)
        }

    # -- record views --------------------------------------------------------
    def vertex(self, i):
        x, y = self.vertices[i]
        return Vertex(float(x), float(y), bool(self.boundary[i]))

    def triangle(self, t):
        """Genealogy entry ``t`` (index into ``triangles``, not ``active``)."""
        p = int(self.parent[t])
        return Triangle(tuple(int(v) for v in self.triangles[t]), None if p < 0 else p, int(self.generation[t]))

    def ancestor_in(self, coarse):
        """For each active triangle, the active triangle of ``coarse`` that
        contains it (as a position in ``coarse.active``)."""
        _check_nested(coarse, self)
        idx = self.active.copy()
        n0 = len(coarse.triangles)
        while True:
            late = idx >= n0
            if not late.any():
                break
            idx[late] = self.parent[idx[late]]
        pos = np.full(len(coarse.triangles), -1, dtype=np.int64)
        pos[coarse.active] = np.arange(coarse.n_elements)
        out = pos[idx]
        if np.any(out < 0):
            raise HierarchyError("fine mesh is not a refinement of the coarse mesh")
        return out


def _label_longest_edge(V, T):
    """Rotate each (counterclockwise) triangle so v0 is opposite its longest
    edge; ties go to the smallest opposite-vertex index."""
    c = V[T]
    L = np.stack(
        [
            np.linalg.norm(c[:, 2] - c[:, 1], axis=1),
            np.linalg.norm(c[:, 0] - c[:, 2], axis=1),
            np.linalg.norm(c[:, 1] - c[:, 0], axis=1),
        ],
        axis=1,
    )
    longest = L.max(axis=1, keepdims=True)
    tied = L >= longest * (1.0 - 1e-12)
    opp = np.where(tied, T, np.iinfo(np.int64).max)
    j = np.argmin(opp, axis=1)
    rows = np.arange(len(T))[:, None]
    return T[rows, (j[:, None] + np.arange(3)) % 3]


def _topological_boundary(nv, T):
    e = np.concatenate([T[:, [1, 2]], T[:, [2, 0]], T[:, [0, 1]]])
    e.sort(axis=1)
    key = e[:, 0].astype(np.int64) * nv + e[:, 1]
    u, inv, counts = np.unique(key, return_inverse=True, return_counts=True)
    b = e[counts[inv] == 1]
    flags = np.zeros(nv, dtype=bool)
    flags[b.ravel()] = True
    return flags


def from_arrays(vertices, triangles, boundary=None, domain=None):
    """Build a level-0 mesh from raw arrays.

    Triangles are reoriented counterclockwise and labelled so the
    refinement edge is the longest edge. Boundary flags default to the
    vertices of edges that belong to a single triangle.
    """
    V = np.ascontiguousarray(vertices, dtype=float)
    T = np.array(triangles, dtype=np.int64)
    if V.ndim != 2 or V.shape[1] != 2 or T.ndim != 2 or T.shape[1] != 3:
        raise GeometryError("expected (nv, 2) vertices and (nt, 3) triangles")
    if T.size and (T.min() < 0 or T.max() >= len(V)):
        raise GeometryError("triangle refers to a missing vertex")
    c = V[T]
    d1, d2 = c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]
    area2 = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    scale = np.maximum(np.einsum("ij,ij->i", d1, d1), np.einsum("ij,ij->i", d2, d2))
    if np.any(np.abs(area2) <= _REL_TOL * scale):
        raise GeometryError("degenerate triangle")
    cw = area2 < 0
    T[cw] = T[cw][:, [0, 2, 1]]
    T = _label_longest_edge(V, T)
    if boundary is None:
        boundary = _topological_boundary(len(V), T)
    boundary = np.asarray(boundary, dtype=bool)
    nt = len(T)
    return Mesh(
        vertices=V,
        boundary=boundary,
        vertex_parents=np.full((len(V), 2), -1, dtype=np.int64),
        triangles=T,
        parent=np.full(nt, -1, dtype=np.int64),
        generation=np.zeros(nt, dtype=np.int64),
        active=np.arange(nt, dtype=np.int64),
        domain=domain,
    )


def initial_mesh(domain, cells=None):
    """Structured coarse mesh: a grid of square cells, each split along its
    (x, y) -> (x + h, y + h) diagonal.

    ``cells`` is the number of cells per side of the bounding square
    (default 1 for a square, 2 for the L-shape, which needs an even count).
    """
    if not isinstance(domain, DomainDef):
        raise ConfigurationError(f"unsupported domain descriptor {domain!r}")
    if domain.kind == "square":
        n = 1 if cells is None else int(cells)
        lo, hi = domain.a, domain.b
    else:
        n = 2 if cells is None else int(cells)
        if n % 2:
            raise ConfigurationError("L-shape grid needs an even number of cells per side")
        lo, hi = -1.0, 1.0
    if n < 1:
        raise ConfigurationError("need at least one cell per side")
    t = np.linspace(lo, hi, n + 1)
    X, Y = np.meshgrid(t, t, indexing="xy")
    V = np.column_stack([X.ravel(), Y.ravel()])
    tris = []
    for j in range(n):
        for i in range(n):
            if domain.kind == "l_shape" and (t[i] + t[i + 1]) > 0 and (t[j] + t[j + 1]) < 0:
                continue
            p00 = j * (n + 1) + i
            p10, p01, p11 = p00 + 1, p00 + n + 1, p00 + n + 2
            tris.append((p00, p10, p11))
            tris.append((p00, p11, p01))
    T = np.array(tris, dtype=np.int64)
    used = np.unique(T)
    renumber = np.full(len(V), -1, dtype=np.int64)
    renumber[used] = np.arange(len(used))
    V, T = V[used], renumber[T]
    return from_arrays(V, T, boundary=domain.on_boundary(V), domain=domain)


def element_geometry(mesh, t):
    """Area, diameter (longest edge), edge lengths and outward unit normals
    of active triangle ``t``."""
    return (
        float(mesh.areas[t]),
        float(mesh.diameters[t]),
        mesh.edge_lengths[t].copy(),
        mesh.outward_normals[t].copy(),
    )


def bisect(mesh, marked):
    """Bisect the marked triangles and close the mesh conformingly.

    Every triangle touching a marked edge gets its own refinement edge
    marked, until nothing changes. Then each triangle whose refinement edge
    is marked is bisected once, and each child whose refinement edge (one of
    the parent's other edges) is marked is bisected again, so every marked
    edge is split in all triangles containing it.
    """
    marked = np.unique(np.asarray(list(marked) if not isinstance(marked, np.ndarray) else marked, dtype=np.int64))
    if marked.size == 0:
        return mesh
    if marked[0] < 0 or marked[-1] >= mesh.n_elements:
        raise IndexError("marked element outside the active set")

    edges, tri_edges, edge_tris = mesh.edge_data
    emark = np.zeros(len(edges), dtype=bool)
    emark[tri_edges[marked, 0]] = True
    while True:
        need = emark[tri_edges].any(axis=1) & ~emark[tri_edges[:, 0]]
        if not need.any():
            break
        emark[tri_edges[need, 0]] = True

    nv = mesh.n_vertices
    new_e = np.flatnonzero(emark)
    mid = np.full(len(edges), -1, dtype=np.int64)
    mid[new_e] = nv + np.arange(len(new_e))
    ends = edges[new_e]
    V = np.vstack([mesh.vertices, 0.5 * (mesh.vertices[ends[:, 0]] + mesh.vertices[ends[:, 1]])])
    boundary = np.concatenate([mesh.boundary, edge_tris[new_e, 1] < 0])
    vparents = np.vstack([mesh.vertex_parents, ends])

    T = mesh.elements
    split = emark[tri_edges[:, 0]]
    pos = np.flatnonzero(split)
    gid = mesh.active[pos]
    v0, v1, v2 = T[pos].T
    m = mid[tri_edges[pos, 0]]
    gen = mesh.generation[gid] + 1

    n_all = len(mesh.triangles)
    k = len(pos)
    child_a = np.column_stack([m, v0, v1])
    child_b = np.column_stack([m, v2, v0])
    ida = n_all + np.arange(k)
    idb = n_all + k + np.arange(k)

    # second bisection of the children across the parent's other two edges
    ea = tri_edges[pos, 2]
    eb = tri_edges[pos, 1]
    sa = emark[ea]
    sb = emark[eb]
    ma, mb = mid[ea[sa]], mid[eb[sb]]
    a_kids = [
        np.column_stack([ma, m[sa], v0[sa]]),
        np.column_stack([ma, v1[sa], m[sa]]),
    ]
    b_kids = [
        np.column_stack([mb, m[sb], v2[sb]]),
        np.column_stack([mb, v0[sb], m[sb]]),
    ]
    base = n_all + 2 * k
    na, nb = int(sa.sum()), int(sb.sum())
    gc_tris = np.vstack(a_kids + b_kids)
    gc_parent = np.concatenate([ida[sa], ida[sa], idb[sb], idb[sb]])
    gc_gen = np.concatenate([gen[sa], gen[sa], gen[sb], gen[sb]]) + 1
    gc_ids = base + np.arange(2 * na + 2 * nb)

    triangles = np.vstack([mesh.triangles, child_a, child_b, gc_tris])
    parent = np.concatenate([mesh.parent, gid, gid, gc_parent])
    generation = np.concatenate([mesh.generation, gen, gen, gc_gen])
    active = np.concatenate([mesh.active[~split], ida[~sa], idb[~sb], gc_ids])
    return Mesh(V, boundary, vparents, triangles, parent, generation, active, mesh.domain)


def refine_uniform(mesh, times=1):
    for _ in range(times):
        mesh = bisect(mesh, np.arange(mesh.n_elements))
    return mesh


def _check_nested(coarse, fine):
    nc, tc = coarse.n_vertices, len(coarse.triangles)
    if (
        fine.n_vertices < nc
        or len(fine.triangles) < tc
        or not np.array_equal(fine.vertices[:nc], coarse.vertices)
        or not np.array_equal(fine.triangles[:tc], coarse.triangles)
    ):
        raise HierarchyError("fine mesh is not a descendant of the coarse mesh")


def prolongation(coarse, fine):
    """Sparse (n_fine x n_coarse) matrix interpolating coarse P1 functions
    onto the nested fine mesh, over all vertices (boundary included)."""
    _check_nested(coarse, fine)
    nc, nf = coarse.n_vertices, fine.n_vertices
    # raises if some fine triangle does not descend from an active coarse one
    fine.ancestor_in(coarse)
    par = fine.vertex_parents
    depth = np.zeros(nf, dtype=np.int64)
    for i in range(nc, nf):
        a, b = par[i]
        depth[i] = 1 + max(depth[a], depth[b])
    P = sp.csr_matrix((np.ones(nc), (np.arange(nc), np.arange(nc))), shape=(nf, nc))
    for d in range(1, int(depth.max(initial=0)) + 1):
        rows = np.flatnonzero(depth == d)
        block = 0.5 * (P[par[rows, 0]] + P[par[rows, 1]])
        block = block.tocoo()
        scatter = sp.csr_matrix((block.data, (rows[block.row], block.col)), shape=(nf, nc))
        P = (P + scatter).tocsr()
    P.sum_duplicates()
    return P


# -- evaluation helpers ----------------------------------------------------

def interpolate(mesh, func):
    """Nodal interpolant of ``func(x, y)``."""
    x, y = mesh.vertices.T
    return np.asarray(func(x, y), dtype=float) * np.ones(mesh.n_vertices)


def locate(mesh, points, tol=1e-12):
    """Active-element position and barycentric coordinates for each point
    (brute force; meant for checks, not inner loops)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    c = mesh.corners
    grads = mesh.basis_gradients
    elem = np.full(len(pts), -1, dtype=np.int64)
    bary = np.zeros((len(pts), 3))
    for k, p in enumerate(pts):
        lam = np.einsum("tjd,td->tj", grads, p - c[:, 0])
        lam[:, 0] = 1.0 - lam[:, 1] - lam[:, 2]
        ok = np.flatnonzero(lam.min(axis=1) >= -tol)
        if ok.size == 0:
            raise ValueError(f"point {p} outside the mesh")
        elem[k] = ok[0]
        bary[k] = lam[ok[0]]
    return elem, bary


def evaluate(mesh, u, points):
    """Point values of the P1 function with nodal vector ``u``."""
    elem, bary = locate(mesh, points)
    return np.einsum("kj,kj->k", bary, np.asarray(u)[mesh.elements[elem]])


# -- text mesh format --------------------------------------------------------

def write_mesh(path, mesh):
    """Header ``nv nt``, then ``x y boundary_flag`` per vertex and
    ``v0 v1 v2`` per active triangle."""
    with open(path, "w") as fh:
        fh.write(f"{mesh.n_vertices} {mesh.n_elements}\n")
        for (x, y), b in zip(mesh.vertices, mesh.boundary):
            fh.write(f"{float(x)!r} {float(y)!r} {int(b)}\n")
        for v in mesh.elements:
            fh.write(f"{v[0]} {v[1]} {v[2]}\n")


def read_mesh(path, domain=None):
    with open(path) as fh:
        tokens = fh.read().split()
    try:
        nv, nt = int(tokens[0]), int(tokens[1])
        vals = tokens[2:]
        vtab = np.array(vals[: 3 * nv], dtype=float).reshape(nv, 3)
        T = np.array(vals[3 * nv : 3 * nv + 3 * nt], dtype=np.int64).reshape(nt, 3)
    except (IndexError, ValueError) as exc:
        raise ConfigurationError(f"malformed mesh file {path}: {exc}") from None
    return from_arrays(vtab[:, :2], T, boundary=vtab[:, 2] != 0, domain=domain)
