import numpy as np
import pytest
import scipy.sparse as sp

from biharmfem.linalg import (SaddleSystem, SolverError, cg_solve,
                              infsup_constant, is_symmetric, kernel_dimension,
                              matrix_rank, saddle_solve)


def test_cg_identity():
    A = sp.identity(5, format="csr")
    b = np.array([1.0, -2.0, 3.0, 0.5, 0.0])
    assert np.allclose(cg_solve(A, b), b, atol=1e-12)


def test_cg_1d_laplacian():
    # tridiag(-1, 2, -1), b = ones, n = 4  ->  x = (2, 3, 3, 2)
    A = sp.diags([[-1.0] * 3, [2.0] * 4, [-1.0] * 3], [-1, 0, 1], format="csr")
    x = cg_solve(A, np.ones(4), tol=1e-14)
    assert np.allclose(x, [2.0, 3.0, 3.0, 2.0], atol=1e-10)


def test_cg_zero_rhs():
    A = sp.identity(3, format="csr")
    assert np.array_equal(cg_solve(A, np.zeros(3)), np.zeros(3))


def test_cg_nonconvergence_error():
    n = 50
    A = sp.diags([[-1.0] * (n - 1), [2.0] * n, [-1.0] * (n - 1)], [-1, 0, 1],
                 format="csr")
    with pytest.raises(SolverError) as err:
        cg_solve(A, np.ones(n), tol=1e-14, maxit=3)
    assert err.value.residual is not None


def test_cg_deterministic():
    rng = np.random.default_rng(3)
    M = rng.standard_normal((30, 30))
    A = sp.csr_matrix(M @ M.T + 30 * np.eye(30))
    b = rng.standard_normal(30)
    x1 = cg_solve(A, b)
    x2 = cg_solve(A, b)
    assert x1.tobytes() == x2.tobytes()


def test_saddle_empty_pressure_reduces_to_spd_solve():
    A = sp.diags([2.0, 3.0], format="csr")
    B = sp.csr_matrix((0, 2))
    u, p = saddle_solve(SaddleSystem(A, B, np.array([2.0, 6.0]), np.zeros(0)))
    assert np.allclose(u, [1.0, 2.0])
    assert p.size == 0


def test_saddle_hand_system():
    # A = diag(2, 4), B = [1, 1], f = (1, 2), g = (3,)
    # u = ((1-p)/2, (2-p)/4); u1 + u2 = 3  =>  4 - 3p = 12  =>  p = -8/3,
    # u = (11/6, 7/6)
    A = sp.diags([2.0, 4.0], format="csc")
    B = sp.csr_matrix(np.array([[1.0, 1.0]]))
    u, p = saddle_solve(SaddleSystem(A, B, np.array([1.0, 2.0]),
                                     np.array([3.0])), tol=1e-12)
    assert p[0] == pytest.approx(-8.0 / 3.0, abs=1e-12)
    assert np.allclose(u, [11.0 / 6.0, 7.0 / 6.0], atol=1e-12)


def test_saddle_rank_deficient_rejected():
    A = sp.identity(2, format="csr")
    B = sp.csr_matrix(np.zeros((1, 2)))
    with pytest.raises(SolverError):
        saddle_solve(SaddleSystem(A, B, np.zeros(2), np.array([1.0])))


def test_kernel_dimension_zero_and_identity():
    assert kernel_dimension(sp.csr_matrix((4, 4))) == 4
    assert kernel_dimension(sp.identity(4, format="csr")) == 0
    A = sp.csr_matrix(np.array([[1.0, 1.0, 0.0], [0.0, 0.0, 0.0]]))
    assert kernel_dimension(A) == 2
    assert matrix_rank(A) == 1


def test_infsup_one_dimensional_case():
    # dim(pressure) = 1: value is ||A^{-1/2} B^T q|| / ||q||_Mp
    A = sp.diags([2.0, 8.0], format="csc")
    B = sp.csr_matrix(np.array([[2.0, 4.0]]))
    Mp = sp.csr_matrix(np.array([[4.0]]))
    got = infsup_constant(B, A, Mp)
    want = np.sqrt((2.0**2 / 2.0 + 4.0**2 / 8.0) / 4.0)
    assert got == pytest.approx(want, rel=1e-12)


def test_infsup_small_dense_path():
    rng = np.random.default_rng(5)
    M = rng.standard_normal((8, 8))
    A = sp.csc_matrix(M @ M.T + 8 * np.eye(8))
    B = sp.csr_matrix(rng.standard_normal((3, 8)))
    Mp = sp.csr_matrix(np.eye(3))
    c = infsup_constant(B, A, Mp)
    # brute-force reference via dense eigenvalues
    import scipy.linalg as sla
    S = B.toarray() @ np.linalg.solve(A.toarray(), B.toarray().T)
    lam = sla.eigh(S, np.eye(3), eigvals_only=True)[0]
    assert c == pytest.approx(np.sqrt(max(lam, 0.0)), rel=1e-10)


def test_is_symmetric():
    A = sp.csr_matrix(np.array([[1.0, 2.0], [2.0, 3.0]]))
    assert is_symmetric(A)
    A = sp.csr_matrix(np.array([[1.0, 2.0], [2.1, 3.0]]))
    assert not is_symmetric(A)


def test_infsup_invariant_under_pressure_permutation():
    rng = np.random.default_rng(11)
    nu, npres = 40, 12
    M = rng.standard_normal((nu, nu))
    A = sp.csc_matrix(M @ M.T + nu * np.eye(nu))
    B = sp.csr_matrix(rng.standard_normal((npres, nu)))
    Mp_half = rng.standard_normal((npres, npres))
    Mp = sp.csr_matrix(Mp_half @ Mp_half.T + npres * np.eye(npres))
    base = infsup_constant(B, A, Mp)
    perm = rng.permutation(npres)
    P = sp.csr_matrix((np.ones(npres), (np.arange(npres), perm)),
                      shape=(npres, npres))
    permuted = infsup_constant(P @ B, A, P @ Mp @ P.T)
    assert permuted == pytest.approx(base, rel=1e-10)


def test_saddle_deterministic():
    rng = np.random.default_rng(21)
    M = rng.standard_normal((20, 20))
    A = sp.csc_matrix(M @ M.T + 20 * np.eye(20))
    B = sp.csr_matrix(rng.standard_normal((5, 20)))
    f, g = rng.standard_normal(20), rng.standard_normal(5)
    u1, p1 = saddle_solve(SaddleSystem(A, B, f, g))
    u2, p2 = saddle_solve(SaddleSystem(A, B, f, g))
    assert u1.tobytes() == u2.tobytes() and p1.tobytes() == p2.tobytes()


def test_matrix_market_dump(tmp_path):
    from biharmfem.linalg import dump_matrix_market
    from scipy.io import mmread
    A = sp.csr_matrix(np.array([[1.0, 0.0], [2.0, 3.0]]))
    path = tmp_path / "a.mtx"
    dump_matrix_market(A, path)
    B = mmread(str(path)).tocsr()
    assert (abs(A - B)).max() == 0.0
