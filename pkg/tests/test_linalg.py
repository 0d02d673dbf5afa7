import numpy as np
import pytest
import scipy.linalg as sla
import scipy.sparse as sp

from mlcafem import assembly as asm, linalg as la, mesh as ms
from mlcafem.exceptions import NonConvergenceError, ReductionError
from mlcafem.problems import get_problem


def _spd(rng, n, cond=1e3):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return Q @ np.diag(np.geomspace(1, cond, n)) @ Q.T


def test_cg_identity_one_iteration():
    b = np.arange(1.0, 6.0)
    c = la.OpCounter()
    np.testing.assert_allclose(la.cg_solve(sp.eye(5, format="csr"), b, counter=c), b)
    assert c.cg_iterations == 1


def test_cg_diag():
    x = la.cg_solve(np.diag([1.0, 4.0]), np.array([1.0, 4.0]))
    np.testing.assert_allclose(x, [1.0, 1.0])


def test_cg_random_spd(rng):
    A = _spd(rng, 50)
    b = rng.standard_normal(50)
    x = la.cg_solve(A, b, tol=1e-10)
    assert np.linalg.norm(A @ x - b) <= 1e-10 * np.linalg.norm(b)


def test_cg_nonconvergence_carries_residual(rng):
    A = _spd(rng, 50, cond=1e8)
    with pytest.raises(NonConvergenceError) as info:
        la.cg_solve(A, rng.standard_normal(50), tol=1e-14, max_iter=3)
    assert info.value.residual > 1e-14
    assert info.value.iterations == 3


def test_cg_zero_rhs():
    assert not la.cg_solve(np.eye(3), np.zeros(3)).any()


@pytest.mark.parametrize("method", ["ql", "lapack"])
def test_dense_examples(method):
    eig = la.dense_sym_gen_eig(np.diag([1.0, 2.0]), np.eye(2), method=method)
    np.testing.assert_allclose(eig.values, [1.0, 2.0])
    np.testing.assert_allclose(np.abs(eig.vectors), np.eye(2), atol=1e-15)
    B = _spd(np.random.default_rng(1), 5)
    np.testing.assert_allclose(la.dense_sym_gen_eig(B, B, method=method).values, 1.0, atol=1e-12)


@pytest.mark.parametrize("n", [8, 40, 200])
def test_dense_random_pencil(rng, n):
    A = rng.standard_normal((n, n))
    A = A + A.T
    B = _spd(rng, n, cond=50)
    eig = la.dense_sym_gen_eig(A, B, method="ql")
    X = eig.vectors
    assert np.all(np.diff(eig.values) >= 0)
    np.testing.assert_allclose(X.T @ B @ X, np.eye(n), atol=1e-10)
    for p in eig:
        assert np.linalg.norm(A @ p.u - p.lam * (B @ p.u)) <= 1e-10 * max(1.0, abs(p.lam)) * n
        assert p.lam == pytest.approx((p.u @ A @ p.u) / (p.u @ B @ p.u), abs=1e-12 * max(1, abs(p.lam)))
        assert p.u[np.argmax(np.abs(p.u))] > 0
    np.testing.assert_allclose(eig.values, sla.eigh(A, B, eigvals_only=True), rtol=1e-10, atol=1e-10)


def test_dense_ql_and_lapack_agree(rng):
    A = rng.standard_normal((60, 60))
    A = A @ A.T
    B = _spd(rng, 60)
    a = la.dense_sym_gen_eig(A, B, count=4, method="ql")
    b = la.dense_sym_gen_eig(A, B, count=4, method="lapack")
    scale = np.abs(la.dense_sym_gen_eig(A, B, method="lapack").values).max()
    np.testing.assert_allclose(a.values, b.values, atol=1e-13 * scale)
    np.testing.assert_allclose(a.vectors, b.vectors, atol=1e-6 * np.abs(b.vectors).max())


def test_dense_not_spd():
    with pytest.raises(ReductionError):
        la.dense_sym_gen_eig(np.eye(2), np.diag([1.0, -1.0]))
    with pytest.raises(ValueError):
        la.dense_sym_gen_eig(np.eye(2), np.eye(2), method="jacobi")


def test_sparse_diag_pencil():
    K = sp.diags([1.0, 2.0, 3.0]).tocsr()
    eig = la.sparse_smallest_eigs(K, sp.eye(3), 1)
    assert eig[0].lam == pytest.approx(1.0)


def _reduced(problem, n):
    mesh = ms.initial_mesh(problem.domain, n)
    K = asm.apply_dirichlet(asm.assemble_stiffness(mesh, problem), mesh.boundary)
    M = asm.apply_dirichlet(asm.assemble_mass(mesh), mesh.boundary)
    return K, M


def test_sparse_matches_dense_on_small_mesh():
    # 6x6 unit square grid: 25 free dofs; L-shape 8x8: 33 free dofs
    for name, n in (("oracle_square", 6), ("example2", 8)):
        K, M = _reduced(get_problem(name), n)
        assert 20 <= K.shape[0] <= 40
        sparse = la.sparse_smallest_eigs(K, M, 3)
        dense = la.dense_sym_gen_eig(K.toarray(), M.toarray(), method="ql")
        np.testing.assert_allclose(sparse.values, dense.values[:3], rtol=1e-9)


def test_sparse_contract(rng):
    K, M = _reduced(get_problem("oracle_square"), 12)
    c = la.OpCounter()
    eig = la.sparse_smallest_eigs(K, M, 4, tol=1e-8, counter=c)
    X = eig.vectors
    np.testing.assert_allclose(X.T @ (M @ X), np.eye(4), atol=1e-8)
    assert np.all(np.diff(eig.values) >= 0)
    res = la.m_inverse_norms(M, K @ X - (M @ X) * eig.values)
    assert np.all(res <= 1e-8 * eig.values)
    assert c.sparse_eig_calls == 1 and c.sparse_eig_iterations > 0


def test_sparse_monotone_from_above():
    prob = get_problem("oracle_square")
    lams = [la.sparse_smallest_eigs(*_reduced(prob, n), 1)[0].lam for n in (4, 8, 16, 32)]
    assert np.all(np.diff(lams) < 0)
    assert min(lams) >= 2 * np.pi**2


def test_sparse_bad_q():
    K = sp.eye(3, format="csr")
    with pytest.raises(ValueError):
        la.sparse_smallest_eigs(K, K, 0)
    with pytest.raises(ValueError):
        la.sparse_smallest_eigs(K, K, 4)
