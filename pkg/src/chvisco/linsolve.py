"""Sparse linear solves with enforced residual contracts.

Storage is ``scipy.sparse.csr_matrix``; direct solves use SuperLU with a
COLAMD ordering, iterative SPD solves use Jacobi-preconditioned CG.
Every returned solution has been checked against ``||Ax - b|| <= rel_tol ||b||``.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

DEFAULT_TOL = 1e-12


class SolverError(RuntimeError):
    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message if residual is None else f"{message} (relative residual {residual:.3e})")
        self.residual = residual


def as_csr(A) -> sp.csr_matrix:
    A = sp.csr_matrix(A)
    A.sum_duplicates()
    A.sort_indices()
    if not np.all(np.isfinite(A.data)):
        raise SolverError("matrix has non-finite entries")
    return A


def _check_tol(rel_tol: float) -> None:
    if not 0.0 < rel_tol <= 1e-6:
        raise ValueError(f"rel_tol must lie in (0, 1e-6], got {rel_tol}")


def _relres(A, x, b) -> float:
    nb = np.linalg.norm(b)
    return np.linalg.norm(A @ x - b) / (nb if nb > 0 else 1.0)


class Factorization:
    """Reusable sparse LU factorization; each solve is residual-checked and refined."""

    def __init__(self, A, rel_tol: float = DEFAULT_TOL, max_refine: int = 3):
        _check_tol(rel_tol)
        self.A = as_csr(A)
        if self.A.shape[0] != self.A.shape[1]:
            raise ValueError(f"matrix must be square, got {self.A.shape}")
        self.rel_tol = rel_tol
        self.max_refine = max_refine
        try:
            self._lu = spla.splu(self.A.tocsc(), permc_spec="COLAMD")
        except RuntimeError as exc:
            raise SolverError(f"factorization failed: {exc}") from None
        pivots = np.abs(self._lu.U.diagonal())
        if pivots.size and pivots.min() <= 1e-14 * pivots.max():
            raise SolverError(
                f"matrix is numerically singular (pivot ratio {pivots.min() / pivots.max():.2e})"
            )

    def solve(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if not np.any(b):
            return np.zeros_like(b)
        x = self._lu.solve(b)
        res = _relres(self.A, x, b)
        for _ in range(self.max_refine):
            if res <= self.rel_tol:
                break
            x = x + self._lu.solve(b - self.A @ x)
            res = _relres(self.A, x, b)
        if not (res <= self.rel_tol):
            raise SolverError("direct solve missed its residual target", res)
        return x


def solve_general(A, b: np.ndarray, rel_tol: float = DEFAULT_TOL) -> np.ndarray:
    return Factorization(A, rel_tol).solve(b)


def solve_spd(A, b: np.ndarray, rel_tol: float = DEFAULT_TOL, method: str = "direct",
              maxiter: int | None = None) -> np.ndarray:
    """Solve a symmetric positive definite system (SPD-ness is the caller's claim)."""
    _check_tol(rel_tol)
    if method == "direct":
        return solve_general(A, b, rel_tol)
    if method != "cg":
        raise ValueError(f"unknown method {method!r}")
    A = as_csr(A)
    b = np.asarray(b, dtype=float)
    if not np.any(b):
        return np.zeros_like(b)
    d = A.diagonal()
    if np.any(d <= 0):
        raise SolverError("non-positive diagonal; matrix is not SPD")
    precond = spla.LinearOperator(A.shape, matvec=lambda r: r / d)
    # CG's internal residual drifts from the true one, so iterate with a margin
    x, info = spla.cg(A, b, rtol=0.1 * rel_tol, atol=0.0, M=precond,
                      maxiter=maxiter or 20 * A.shape[0])
    res = _relres(A, x, b)
    if res > rel_tol:
        raise SolverError(f"CG did not converge (info={info})", res)
    return x


class SaddlePointSolver:
    """Monolithic factorization of ``[[A, B^T, 0], [B, 0, c], [0, c^T, 0]]``.

    ``c`` (the pressure-mean weights) closes the pressure null space with a
    single Lagrange multiplier; without it the plain two-block system is used.
    """

    def __init__(self, A, B, mean_weights: np.ndarray | None = None, rel_tol: float = DEFAULT_TOL):
        A, B = as_csr(A), as_csr(B)
        self.nv, self.np_ = A.shape[0], B.shape[0]
        blocks = [[A, B.T], [B, None]]
        self.c = None
        if mean_weights is not None:
            self.c = np.asarray(mean_weights, dtype=float).reshape(-1, 1)
            blocks = [[A, B.T, None], [B, None, sp.csr_matrix(self.c)],
                      [None, sp.csr_matrix(self.c.T), None]]
        self.K = sp.bmat(blocks, format="csr")
        self.rel_tol = rel_tol
        self._fact = Factorization(self.K, rel_tol)

    def solve(self, f: np.ndarray, g: np.ndarray | None = None):
        rhs = np.zeros(self.K.shape[0])
        rhs[: self.nv] = f
        if g is not None:
            rhs[self.nv : self.nv + self.np_] = g
        x = self._fact.solve(rhs)
        return x[: self.nv], x[self.nv : self.nv + self.np_]


def solve_saddle(A, B, f: np.ndarray, rel_tol: float = DEFAULT_TOL,
                 mean_weights: np.ndarray | None = None):
    """Return ``(v, p)`` solving ``A v + B^T p = f, B v = 0`` (with zero-mean ``p`` if weights given)."""
    _check_tol(rel_tol)
    solver = SaddlePointSolver(A, B, mean_weights, rel_tol)
    v, p = solver.solve(f)
    nf = np.linalg.norm(f) or 1.0
    r1 = np.linalg.norm(solver.K[: solver.nv, : solver.nv + solver.np_] @ np.concatenate([v, p]) - f)
    r2 = np.linalg.norm(as_csr(B) @ v)
    if r1 > rel_tol * nf or r2 > rel_tol * nf:
        raise SolverError("saddle-point block residuals exceed tolerance", max(r1, r2) / nf)
    return v, p
