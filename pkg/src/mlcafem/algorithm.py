"""Adaptive loops: solve -> estimate -> mark -> refine.

``multilevel_correction_solve`` never runs an eigensolver on a refined
mesh. After refining, each eigenvector of the previous level is corrected by
one source solve on the new mesh,

    a(u~, v) = lambda_k (u_k, v)   for all v in V_{k+1},

and the new eigenpairs are the Ritz pairs of the space spanned by the coarse
P1 basis and the corrected vectors u~. The dense pencil has size
n_coarse + q whatever the fine-mesh size.

``direct_afem_solve`` is the standard loop with a sparse eigensolve on every
mesh; ``uniform_solve`` is the same solver on uniformly refined meshes.
"""

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .assembly import apply_dirichlet, assemble_load, assemble_mass, assemble_stiffness, expand
from .estimator import bvp_indicators, eigen_indicators, energy_error, operator_oscillation
from .exceptions import ConfigurationError
from .linalg import EigenPair, OpCounter, cg_solve, dense_sym_gen_eig, sparse_smallest_eigs
from .mesh import bisect, initial_mesh, prolongation

log = logging.getLogger(__name__)

PHASES = ("solve", "eig", "estimate", "mark", "refine")


@dataclass
class AdaptiveConfig:
    theta: float = 0.4
    max_iterations: int = 20
    max_dofs: int = 200_000
    num_eigenpairs: int = 1
    linear_tol: float = 1e-10
    eig_tol: float = 1e-8
    coarse_cells: int | None = None

    def __post_init__(self):
        if not 0.0 < self.theta < 1.0:
            raise ConfigurationError(f"theta must lie in (0, 1), got {self.theta}")
        if self.num_eigenpairs < 1:
            raise ConfigurationError("num_eigenpairs must be at least 1")
        if self.max_iterations < 0:
            raise ConfigurationError("max_iterations must be nonnegative")


@dataclass
class LevelRecord:
    level: int
    dofs: int
    n_elements: int
    eigenvalues: list
    eta_total: list
    osc_total: list
    errors: list
    timings: dict
    ops: dict
    energy_error: float | None = None
    mesh: object = field(default=None, repr=False)
    vectors: list = field(default_factory=list, repr=False)
    indicators: list = field(default_factory=list, repr=False)


def dorfler_mark(indicators, theta):
    """Smallest set of elements whose squared indicators reach ``theta``
    times the total.

    Accepts an IndicatorField or an array of squared indicators; ties are
    broken by element index. Returns a sorted index array (empty when every
    indicator vanishes).
    """
    if not 0.0 < theta < 1.0:
        raise ConfigurationError(f"theta must lie in (0, 1), got {theta}")
    eta_sq = np.asarray(getattr(indicators, "eta_sq", indicators), dtype=float)
    total = eta_sq.sum()
    if total <= 0.0:
        return np.empty(0, dtype=np.int64)
    order = np.argsort(-eta_sq, kind="stable")
    csum = np.cumsum(eta_sq[order])
    k = int(np.searchsorted(csum, theta * total, side="left")) + 1
    return np.sort(order[: min(k, len(order))])


def eigenvalue_error_expansion_check(K, M, pair, w):
    """|LHS - RHS| of the Rayleigh quotient expansion

        a(w,w)/(w,w) - lam = a(w-u,w-u)/(w,w) - lam (w-u,w-u)/(w,w)

    around the eigenpair ``pair`` (K, M may be full or reduced, matching the
    vectors)."""
    u = np.asarray(pair.u, dtype=float)
    w = np.asarray(w, dtype=float)
    ww = w @ (M @ w)
    if ww == 0.0:
        raise ValueError("(w, w) = 0")
    lam = pair.lam
    e = w - u
    lhs = (w @ (K @ w)) / ww - lam
    rhs = (e @ (K @ e)) / ww - lam * (e @ (M @ e)) / ww
    return abs(lhs - rhs)


# -- shared pieces ---------------------------------------------------------------

def _coarse_mesh(problem, config, mesh):
    if mesh is not None:
        return mesh
    cells = config.coarse_cells if config.coarse_cells is not None else problem.coarse_cells
    return initial_mesh(problem.domain, cells)


def _system(mesh, problem):
    K = assemble_stiffness(mesh, problem)
    M = assemble_mass(mesh)
    return apply_dirichlet(K, mesh.boundary), apply_dirichlet(M, mesh.boundary)


def _full(mesh, eig):
    return [EigenPair(p.lam, expand(mesh.boundary, p.u)) for p in eig]


def _align(pairs, previous, P, M):
    """Flip signs so each pair has positive M-overlap with the previous-level
    pair it matches best (the prolonged ones)."""
    if previous is None:
        return pairs
    old = np.column_stack([P @ p.u for p in previous])
    new = np.column_stack([p.u for p in pairs])
    overlap = old.T @ (M @ new)
    out = []
    for j, p in enumerate(pairs):
        i = int(np.argmax(np.abs(overlap[:, j])))
        out.append(EigenPair(p.lam, -p.u if overlap[i, j] < 0 else p.u))
    return out


def _estimate(mesh, problem, pairs):
    fields = [eigen_indicators(mesh, problem, p) for p in pairs]
    osc = [operator_oscillation(mesh, problem, p.u).osc for p in pairs]
    return fields, osc


def _record(level, mesh, problem, pairs, fields, osc, timings, counter):
    lams = [p.lam for p in pairs]
    errors = []
    for i, lam in enumerate(lams):
        ref = problem.reference(i)
        errors.append(None if ref is None else abs(lam - ref))
    return LevelRecord(
        level=level,
        dofs=mesh.n_dofs,
        n_elements=mesh.n_elements,
        eigenvalues=lams,
        eta_total=[f.eta for f in fields],
        osc_total=osc,
        errors=errors,
        timings=dict(timings),
        ops=counter.as_dict(),
        mesh=mesh,
        vectors=[p.u for p in pairs],
        indicators=fields,
    )


class _Clock:
    def __init__(self):
        self.t = dict.fromkeys(PHASES, 0.0)
        self._start = None

    def __call__(self, phase):
        clock = self

        class _Ctx:
            def __enter__(self):
                clock._start = time.perf_counter()

            def __exit__(self, *exc):
                clock.t[phase] += time.perf_counter() - clock._start

        return _Ctx()


def _eigen_loop(problem, config, mesh, advance, refine):
    """Drive an adaptive eigenvalue loop.

    ``advance(old_mesh, new_mesh, P, pairs, counter, clock)`` returns the
    eigenpairs on ``new_mesh``; ``refine(mesh, fields, clock)`` returns the
    next mesh or None to stop.
    """
    q = config.num_eigenpairs
    mesh = _coarse_mesh(problem, config, mesh)
    if mesh.n_dofs < q:
        raise ConfigurationError(f"coarse mesh has {mesh.n_dofs} dofs, fewer than q={q}")
    clock, counter = _Clock(), OpCounter()
    with clock("eig"):
        Kf, Mf = _system(mesh, problem)
        pairs = _full(mesh, sparse_smallest_eigs(Kf, Mf, q, tol=config.eig_tol, counter=counter))
    with clock("estimate"):
        fields, osc = _estimate(mesh, problem, pairs)
    records = [_record(0, mesh, problem, pairs, fields, osc, clock.t, counter)]
    for k in range(config.max_iterations):
        if mesh.n_dofs >= config.max_dofs:
            break
        clock, counter = _Clock(), OpCounter()
        new_mesh = refine(mesh, fields, clock)
        if new_mesh is None or new_mesh is mesh:
            break
        if new_mesh.n_dofs > config.max_dofs:
            log.info("stopping: next mesh has %d dofs > max_dofs", new_mesh.n_dofs)
            break
        with clock("refine"):
            P = prolongation(mesh, new_mesh)
        new_pairs = advance(mesh, new_mesh, P, pairs, counter, clock)
        with clock("estimate"):
            new_pairs = _align(new_pairs, pairs, P, assemble_mass(new_mesh))
            fields, osc = _estimate(new_mesh, problem, new_pairs)
        mesh, pairs = new_mesh, new_pairs
        records.append(_record(k + 1, mesh, problem, pairs, fields, osc, clock.t, counter))
    return records


def _dorfler_refine(theta):
    def refine(mesh, fields, clock):
        with clock("mark"):
            total = fields[0]
            for f in fields[1:]:
                total = total + f
            marked = dorfler_mark(total, theta)
        if marked.size == 0:
            return None
        with clock("refine"):
            return bisect(mesh, marked)

    return refine


def _uniform_refine(mesh, fields, clock):
    with clock("refine"):
        for _ in range(2):
            mesh = bisect(mesh, np.arange(mesh.n_elements))
    return mesh


# -- the algorithms ------------------------------------------------------------

class _Correction:
    """State of the multilevel correction: the fixed coarse mesh and the
    accumulated prolongation from it."""

    def __init__(self, problem, config):
        self.problem = problem
        self.config = config
        self.coarse = None
        self.P0 = None

    def __call__(self, old_mesh, new_mesh, P, pairs, counter, clock):
        cfg = self.config
        if self.coarse is None:
            self.coarse = old_mesh
            self.P0 = P
        else:
            self.P0 = (P @ self.P0).tocsr()
        with clock("solve"):
            Kf, Mf = _system(new_mesh, self.problem)
            free = new_mesh.free
            corrected = []
            for p in pairs:
                u_prev = (P @ p.u)[free]
                rhs = p.lam * (Mf @ u_prev)
                corrected.append(cg_solve(Kf, rhs, tol=cfg.linear_tol, x0=u_prev, counter=counter))
        with clock("eig"):
            B0 = self.P0[free][:, self.coarse.free].tocsc()
            U = self._augment(B0, np.column_stack(corrected), Mf)
            KB0 = (Kf @ B0).tocsc()
            KU = Kf @ U
            MB0 = (Mf @ B0).tocsc()
            MU = Mf @ U
            Ar = np.block([[(B0.T @ KB0).toarray(), B0.T @ KU], [KU.T @ B0, U.T @ KU]])
            Br = np.block([[(B0.T @ MB0).toarray(), B0.T @ MU], [MU.T @ B0, U.T @ MU]])
            Ar = 0.5 * (Ar + Ar.T)
            Br = 0.5 * (Br + Br.T)
            eig = dense_sym_gen_eig(Ar, Br, count=cfg.num_eigenpairs, counter=counter)
            out = []
            for e in eig:
                x = e.u
                u = B0 @ x[: B0.shape[1]] + U @ x[B0.shape[1] :]
                u /= np.sqrt(u @ (Mf @ u))
                out.append(EigenPair(e.lam, expand(new_mesh.boundary, u)))
        return out

    @staticmethod
    def _augment(B0, U, Mf):
        """M-orthogonalise the corrected vectors against the coarse space and
        each other, dropping numerically dependent ones."""
        G = (B0.T @ (Mf @ B0)).toarray()
        cho = sla.cho_factor(G)
        kept = []
        for j in range(U.shape[1]):
            v = U[:, j].copy()
            norm0 = np.sqrt(v @ (Mf @ v))
            for _ in range(2):
                v -= B0 @ sla.cho_solve(cho, B0.T @ (Mf @ v))
                for w in kept:
                    v -= (w @ (Mf @ v)) * w
            norm = np.sqrt(v @ (Mf @ v))
            if norm <= 1e-10 * norm0:
                log.warning("dropping corrected vector %d: dependent on the coarse space", j)
                continue
            kept.append(v / norm)
        if not kept:
            return np.zeros((B0.shape[0], 0))
        return np.column_stack(kept)


def multilevel_correction_solve(problem, config=None, mesh=None):
    """Adaptive eigenvalue loop with multilevel correction.

    Returns one LevelRecord per level, starting with the coarse solve.
    """
    config = config or AdaptiveConfig()
    step = _Correction(problem, config)
    return _eigen_loop(problem, config, mesh, step, _dorfler_refine(config.theta))


def _direct_step(problem, config):
    def advance(old_mesh, new_mesh, P, pairs, counter, clock):
        with clock("eig"):
            Kf, Mf = _system(new_mesh, problem)
            eig = sparse_smallest_eigs(Kf, Mf, config.num_eigenpairs, tol=config.eig_tol, counter=counter)
        return _full(new_mesh, eig)

    return advance


def direct_afem_solve(problem, config=None, mesh=None):
    """Standard adaptive loop: full sparse eigensolve on every mesh."""
    config = config or AdaptiveConfig()
    return _eigen_loop(problem, config, mesh, _direct_step(problem, config), _dorfler_refine(config.theta))


def uniform_solve(problem, config=None, mesh=None):
    """Sparse eigensolves on uniformly refined meshes; each level bisects
    every element twice, halving the mesh size."""
    config = config or AdaptiveConfig()
    return _eigen_loop(problem, config, mesh, _direct_step(problem, config), _uniform_refine)


def afem_bvp_solve(problem, f, config=None, mesh=None, exact=None):
    """Adaptive loop for the source problem L u = f, u = 0 on the boundary.

    ``f`` is a callable ``f(x, y)``. ``exact`` may be ``(grad_u, u)`` of the
    true solution, in which case each record carries the energy error.
    """
    config = config or AdaptiveConfig()
    mesh = _coarse_mesh(problem, config, mesh)
    records = []
    u_prev = None
    clock = _Clock()
    for k in range(config.max_iterations + 1):
        counter = OpCounter()
        with clock("solve"):
            K = apply_dirichlet(assemble_stiffness(mesh, problem), mesh.boundary)
            F = apply_dirichlet(assemble_load(mesh, f), mesh.boundary)
            x0 = None if u_prev is None else u_prev[mesh.free]
            u = expand(mesh.boundary, cg_solve(K, F, tol=config.linear_tol, x0=x0, counter=counter))
        with clock("estimate"):
            fld = bvp_indicators(mesh, problem, u, f)
            osc = operator_oscillation(mesh, problem, u, source=f).osc
        err = None
        if exact is not None:
            err = energy_error(mesh, problem, u, exact[0], exact[1] if len(exact) > 1 else None)
        records.append(
            LevelRecord(
                level=k,
                dofs=mesh.n_dofs,
                n_elements=mesh.n_elements,
                eigenvalues=[],
                eta_total=[fld.eta],
                osc_total=[osc],
                errors=[err],
                timings=dict(clock.t),
                ops=counter.as_dict(),
                energy_error=err,
                mesh=mesh,
                vectors=[u],
                indicators=[fld],
            )
        )
        if k == config.max_iterations or mesh.n_dofs >= config.max_dofs:
            break
        clock = _Clock()
        with clock("mark"):
            marked = dorfler_mark(fld, config.theta)
        if marked.size == 0:
            break
        with clock("refine"):
            new_mesh = bisect(mesh, marked)
            if new_mesh.n_dofs > config.max_dofs:
                break
            u_prev = prolongation(mesh, new_mesh) @ u
        mesh = new_mesh
    return records
