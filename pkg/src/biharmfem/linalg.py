"""Sparse linear algebra: CG, saddle-point solves, inf-sup and rank queries.

Matrices are scipy CSR/CSC; everything here is deterministic for fixed
inputs (fixed start vectors, no randomized pivoting options).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SolverError(RuntimeError):
    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


def is_symmetric(A, rel: float = 1e-12) -> bool:
    A = sp.csr_matrix(A)
    d = abs(A - A.T)
    if d.nnz == 0:
        return True
    amax = abs(A).max() if A.nnz else 0.0
    return d.max() <= rel * max(amax, 1e-300)


def cg_solve(A, b, tol: float = 1e-10, maxit: int | None = None,
             precond: str = "jacobi") -> np.ndarray:
    """Preconditioned conjugate gradients; raises on non-convergence."""
    A = sp.csr_matrix(A)
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n)
    if maxit is None:
        maxit = max(1000, 20 * n)
    if precond == "jacobi":
        dinv = 1.0 / A.diagonal()
        apply_m = lambda r: dinv * r
    else:
        apply_m = lambda r: r
    x = np.zeros(n)
    r = b.copy()
    z = apply_m(r)
    p = z.copy()
    rz = float(r @ z)
    for _ in range(maxit):
        Ap = A @ p
        pAp = float(p @ Ap)
        if pAp <= 0.0:
            raise SolverError("matrix not positive definite in cg_solve",
                              residual=np.linalg.norm(r) / bnorm)
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        res = np.linalg.norm(r)
        if res <= tol * bnorm:
            return x
        z = apply_m(r)
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError(f"cg_solve: no convergence in {maxit} iterations",
                      residual=np.linalg.norm(r) / bnorm)


@dataclass
class SaddleSystem:
    """Blocks of [[A, B^T], [B, 0]] [u; p] = [f; g]."""

    A: sp.spmatrix
    B: sp.spmatrix
    f: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        nu = self.A.shape[0]
        npres = self.B.shape[0]
        if self.A.shape != (nu, nu) or self.B.shape[1] != nu:
            raise ValueError("inconsistent saddle system blocks")
        if self.f.shape != (nu,) or self.g.shape != (npres,):
            raise ValueError("inconsistent saddle system right-hand sides")


def saddle_solve(system: SaddleSystem, tol: float = 1e-10):
    """Direct factorization of the indefinite block system, with residual check."""
    A, B, f, g = system.A, system.B, system.f, system.g
    npres = B.shape[0]
    if npres == 0:
        u = _direct_spd(A, f)
        return u, np.zeros(0)
    K = sp.bmat([[A, B.T], [B, None]], format="csc")
    try:
        lu = spla.splu(K)
    except RuntimeError as exc:
        raise SolverError(f"saddle point factorization failed: {exc}") from exc
    sol = lu.solve(np.concatenate([f, g]))
    u, p = sol[: A.shape[0]], sol[A.shape[0]:]
    scale = max(1.0, np.linalg.norm(f), np.linalg.norm(g))
    r1 = np.linalg.norm(A @ u + B.T @ p - f)
    r2 = np.linalg.norm(B @ u - g)
    if not np.isfinite(sol).all() or r1 > tol * scale or r2 > tol * scale:
        raise SolverError("saddle point solve did not reach tolerance "
                          f"(residuals {r1:.3e}, {r2:.3e})",
                          residual=max(r1, r2) / scale)
    return u, p


def _direct_spd(A, b):
    lu = spla.splu(sp.csc_matrix(A))
    return lu.solve(np.asarray(b, dtype=float))


def infsup_constant(B, A, Mp, tol: float = 1e-10) -> float:
    """sqrt of the smallest eigenvalue of B A^-1 B^T q = lam Mp q.

    A is the velocity Gram (SPD), Mp the pressure Gram (SPD); B pairs the
    mean-zero pressure basis with the velocity basis.  Nonpositive smallest
    eigenvalues (beyond roundoff) report 0: the pair is unstable.
    """
    B = sp.csr_matrix(B)
    A = sp.csc_matrix(A)
    Mp = sp.csr_matrix(Mp)
    npres = B.shape[0]
    if npres == 0:
        raise ValueError("empty pressure space")
    alu = spla.splu(A)
    if npres == 1:
        bt = np.asarray(B.todense()).ravel()
        lam = float(bt @ alu.solve(bt)) / float(Mp[0, 0])
        return float(np.sqrt(max(lam, 0.0)))

    def s_mv(q):
        return B @ alu.solve(B.T @ q)

    if npres <= 40:
        S = np.column_stack([s_mv(e) for e in np.eye(npres)])
        lams = scipy.linalg.eigh(S, np.asarray(Mp.todense()), eigvals_only=True)
        lam = float(lams[0])
        return float(np.sqrt(max(lam, 0.0)))

    K = sp.bmat([[A, B.T], [B, None]], format="csc")
    try:
        klu = spla.splu(K)
    except RuntimeError as exc:
        raise SolverError(f"inf-sup saddle factorization failed: {exc}") from exc
    nu = A.shape[0]

    def s_inv(y):
        rhs = np.concatenate([np.zeros(nu), -np.asarray(y, dtype=float)])
        return klu.solve(rhs)[nu:]

    Sop = spla.LinearOperator((npres, npres), matvec=s_mv)
    OPinv = spla.LinearOperator((npres, npres), matvec=s_inv)
    v0 = np.full(npres, 1.0 / np.sqrt(npres))
    try:
        lams = spla.eigsh(Sop, k=1, M=Mp, sigma=0.0, which="LM",
                          OPinv=OPinv, v0=v0, tol=max(tol, 1e-12))
    except spla.ArpackError as exc:
        raise SolverError(f"inf-sup eigensolve failed: {exc}") from exc
    lam = float(lams[0][0])
    return float(np.sqrt(max(lam, 0.0)))


def kernel_dimension(A, tol: float = 1e-8) -> int:
    """Number of singular values below tol * sigma_max (columns = domain)."""
    if sp.issparse(A):
        A = np.asarray(A.todense())
    else:
        A = np.asarray(A, dtype=float)
    ncols = A.shape[1]
    if A.size == 0:
        return ncols
    sv = scipy.linalg.svdvals(A)
    smax = sv[0] if sv.size else 0.0
    if smax == 0.0:
        return ncols
    rank = int(np.count_nonzero(sv >= tol * smax))
    return ncols - rank


def matrix_rank(A, tol: float = 1e-8) -> int:
    if sp.issparse(A):
        ncols = A.shape[1]
    else:
        ncols = np.asarray(A).shape[1]
    return ncols - kernel_dimension(A, tol)


def dump_matrix_market(A, path):
    from scipy.io import mmwrite

    mmwrite(str(path), sp.coo_matrix(A))
