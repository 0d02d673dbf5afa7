"""Linear solvers and symmetric eigensolvers.

``dense_sym_gen_eig`` handles the small pencils of the corrected coarse
space: Cholesky reduction to a standard problem, Householder
tridiagonalisation and implicit QL, with LAPACK taking over for larger
pencils. ``sparse_smallest_eigs`` is the
fine-mesh eigensolver (shift-invert Lanczos around zero) used on the coarse
mesh and by the direct AFEM baseline.
"""

import math
from dataclasses import dataclass, field, asdict

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exceptions import NonConvergenceError, ReductionError


@dataclass
class OpCounter:
    """Work counters, one instance per adaptive level."""

    cg_solves: int = 0
    cg_iterations: int = 0
    sparse_eig_calls: int = 0
    sparse_eig_iterations: int = 0
    dense_eig_calls: int = 0
    dense_eig_size: int = 0

    def as_dict(self):
        return asdict(self)


@dataclass
class EigenPair:
    lam: float
    u: np.ndarray


@dataclass
class EigenSet:
    pairs: list = field(default_factory=list)

    @property
    def count(self):
        return len(self.pairs)

    @property
    def values(self):
        return np.array([p.lam for p in self.pairs])

    @property
    def vectors(self):
        return np.column_stack([p.u for p in self.pairs])

    def __len__(self):
        return len(self.pairs)

    def __getitem__(self, i):
        return self.pairs[i]

    def __iter__(self):
        return iter(self.pairs)


def fix_sign(u):
    """Flip ``u`` so its entry of largest magnitude is positive."""
    k = int(np.argmax(np.abs(u)))
    return -u if u[k] < 0 else u


# -- conjugate gradients -------------------------------------------------------

def default_max_iter(n):
    return int(10 * math.sqrt(n)) + 500


def cg_solve(A, b, tol=1e-10, max_iter=None, x0=None, counter=None):
    """Jacobi-preconditioned conjugate gradients.

    Stops when ||b - A x|| <= tol ||b||; raises NonConvergenceError
    (carrying the achieved relative residual) after ``max_iter`` steps.
    """
    b = np.asarray(b, dtype=float)
    n = len(b)
    if max_iter is None:
        max_iter = default_max_iter(n)
    if counter is not None:
        counter.cg_solves += 1
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n)
    diag = A.diagonal() if sp.issparse(A) else np.diag(A)
    if np.any(diag <= 0):
        raise ValueError("matrix diagonal must be positive")
    dinv = 1.0 / diag
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x
    z = dinv * r
    p = z.copy()
    rz = r @ z
    target = tol * bnorm
    rnorm = np.linalg.norm(r)
    it = 0
    while rnorm > target:
        if it >= max_iter:
            if counter is not None:
                counter.cg_iterations += it
            raise NonConvergenceError(
                f"CG stopped after {it} iterations at relative residual {rnorm / bnorm:.3e}",
                residual=rnorm / bnorm,
                iterations=it,
            )
        Ap = A @ p
        alpha = rz / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        it += 1
        rnorm = np.linalg.norm(r)
        if rnorm <= target:
            # guard against drift of the recursive residual
            r = b - A @ x
            rnorm = np.linalg.norm(r)
            if rnorm <= target:
                break
        z = dinv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    if counter is not None:
        counter.cg_iterations += it
    return x


# -- dense symmetric pencils ---------------------------------------------------

def tridiagonalize(C):
    """Householder reduction C = Q T Q^T; returns (diag, offdiag, Q)."""
    A = np.array(C, dtype=float)
    n = len(A)
    Q = np.eye(n)
    for k in range(n - 2):
        x = A[k + 1 :, k]
        tail = np.linalg.norm(x[1:])
        if tail == 0.0:
            continue
        alpha = -math.copysign(math.hypot(x[0], tail), x[0])
        v = x.copy()
        v[0] -= alpha
        v /= np.linalg.norm(v)
        sub = A[k + 1 :, k + 1 :]
        p = sub @ v
        w = 2.0 * (p - (v @ p) * v)
        sub -= np.outer(v, w) + np.outer(w, v)
        A[k + 1 :, k] = 0.0
        A[k, k + 1 :] = 0.0
        A[k + 1, k] = A[k, k + 1] = alpha
        Qs = Q[:, k + 1 :]
        Qs -= 2.0 * np.outer(Qs @ v, v)
    return np.diag(A).copy(), np.diag(A, -1).copy(), Q


def tridiagonal_ql(d, e, Z):
    """Implicit QL with Wilkinson-type shifts on a symmetric tridiagonal
    matrix; ``Z`` (columns) is rotated along so it ends up holding the
    eigenvectors of Z T Z^T."""
    n = len(d)
    d = [float(v) for v in d]
    e = [float(v) for v in e] + [0.0]
    Zt = np.array(Z, dtype=float).T.copy()
    eps = np.finfo(float).eps
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= eps * dd:
                    break
                m += 1
            if m == l:
                break
            it += 1
            if it > 60:
                raise NonConvergenceError("tridiagonal QL did not converge")
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            i = m - 1
            underflow = False
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                zi = Zt[i].copy()
                Zt[i] = c * zi - s * Zt[i + 1]
                Zt[i + 1] = s * zi + c * Zt[i + 1]
                i -= 1
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return np.array(d), Zt.T


QL_MAX_SIZE = 160


def dense_sym_gen_eig(Ar, Br, count=None, counter=None, method="auto"):
    """All (or the ``count`` smallest) eigenpairs of Ar x = lam Br x.

    Vectors are Br-orthonormal, sorted by ascending eigenvalue, with the
    largest-magnitude entry positive. ``method="ql"`` runs the in-house
    Cholesky / Householder / implicit-QL path, ``"lapack"`` calls
    ``scipy.linalg.eigh``; ``"auto"`` uses QL up to ``QL_MAX_SIZE``.
    """
    Ar = np.asarray(Ar, dtype=float)
    Br = np.asarray(Br, dtype=float)
    n = len(Ar)
    if counter is not None:
        counter.dense_eig_calls += 1
        counter.dense_eig_size = max(counter.dense_eig_size, n)
    if method == "auto":
        method = "ql" if n <= QL_MAX_SIZE else "lapack"
    if method not in ("ql", "lapack"):
        raise ValueError(f"unknown method {method!r}")
    try:
        L = np.linalg.cholesky(0.5 * (Br + Br.T))
    except np.linalg.LinAlgError:
        raise ReductionError("right-hand matrix is not positive definite") from None
    if method == "lapack":
        subset = None if count is None else [0, min(count, n) - 1]
        lam, X = sla.eigh(0.5 * (Ar + Ar.T), 0.5 * (Br + Br.T), subset_by_index=subset)
        order = np.arange(len(lam))
    else:
        Y = sla.solve_triangular(L, Ar, lower=True)
        C = sla.solve_triangular(L, Y.T, lower=True).T
        C = 0.5 * (C + C.T)
        d, e, Q = tridiagonalize(C)
        lam, Z = tridiagonal_ql(d, e, Q)
        order = np.argsort(lam, kind="stable")
        if count is not None:
            order = order[:count]
        X = sla.solve_triangular(L.T, Z[:, order], lower=False)
    pairs = [EigenPair(float(lam[j]), fix_sign(X[:, k])) for k, j in enumerate(order)]
    return EigenSet(pairs)


# -- sparse pencils ------------------------------------------------------------

def m_inverse_norms(M, R):
    """Column norms ||r||_{M^-1} for the columns of R."""
    lu = spla.splu(sp.csc_matrix(M))
    S = lu.solve(np.asarray(R))
    return np.sqrt(np.maximum(np.einsum("ij,ij->j", np.atleast_2d(R.T).T, S), 0.0))


def sparse_smallest_eigs(K, M, q, tol=1e-8, counter=None):
    """The ``q`` smallest eigenpairs of K u = lam M u (both SPD, already
    restricted to the free dofs).

    Each returned pair satisfies ||K u - lam M u||_{M^-1} <= tol * lam;
    otherwise NonConvergenceError is raised.
    """
    n = K.shape[0]
    if q < 1:
        raise ValueError("q must be at least 1")
    if q > n:
        raise ValueError(f"asked for {q} eigenpairs of a pencil of size {n}")
    if counter is not None:
        counter.sparse_eig_calls += 1
    K = sp.csc_matrix(K)
    M = sp.csr_matrix(M)
    if q >= n - 1:
        eig = dense_sym_gen_eig(K.toarray(), M.toarray(), count=q)
        X = eig.vectors
    else:
        lu = spla.splu(K)
        calls = [0]

        def apply_inv(x):
            calls[0] += 1
            return lu.solve(np.asarray(x, dtype=float).ravel())

        op = spla.LinearOperator((n, n), matvec=apply_inv, dtype=float)
        try:
            _, X = spla.eigsh(K, k=q, M=M, sigma=0.0, which="LM", OPinv=op, v0=np.ones(n), tol=1e-14, maxiter=max(1000, 20 * n))
        except spla.ArpackNoConvergence as exc:
            raise NonConvergenceError(f"ARPACK did not converge: {exc}") from None
        finally:
            if counter is not None:
                counter.sparse_eig_iterations += calls[0]
        # Rayleigh-Ritz in the converged block: M-orthonormal, sorted
        eig = dense_sym_gen_eig(X.T @ (K @ X), X.T @ (M @ X))
        X = X @ eig.vectors
        X = np.column_stack([fix_sign(X[:, j]) for j in range(q)])
    lam = np.einsum("ij,ij->j", X, K @ X) / np.einsum("ij,ij->j", X, M @ X)
    X = X / np.sqrt(np.einsum("ij,ij->j", X, M @ X))
    res = m_inverse_norms(M, K @ X - (M @ X) * lam)
    bad = res > tol * np.abs(lam)
    if np.any(bad):
        raise NonConvergenceError(f"eigen residuals {res[bad]} above tolerance", residual=float(res.max()))
    return EigenSet([EigenPair(float(l), X[:, j].copy()) for j, l in enumerate(lam)])
