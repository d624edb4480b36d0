"""Finite element assembly on P1 / P1-tensor / P2-vector spaces.

A ``Discretization`` caches element geometry, basis values at quadrature
points and the CSR scatter pattern of every (row space, column space) pair,
so repeated assembly inside Newton loops is a handful of numpy calls.

Conventions: tensor dofs are ``4 * vertex + (2 * i + j)`` (row-major F_ij),
vector dofs are ``2 * node + c``; P2 local nodes are the three vertices then
the midpoints of the edges opposite them.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .linsolve import Factorization, SaddlePointSolver
from .mesh import DofMap, Mesh, SpaceKind, build_dof_map
from .quadrature import QuadratureRule, quadrature_rule

__all__ = [
    "Discretization",
    "Field",
    "StokesProblem",
    "assemble_cauchy_rhs",
    "assemble_mass",
    "assemble_stiffness",
    "assemble_stokes_blocks",
    "assemble_transport_terms",
    "coupling_operators",
    "project_L2",
    "quadrature_rule",
]

# quadrature degree per form family
DEG_MASS = 2
DEG_STIFF = 1
DEG_TH = 4
DEG_COUPLING = 4
DEG_NONLINEAR = 5


@dataclass(frozen=True, eq=False)
class Field:
    dof_map: DofMap
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.dof_map.num_dofs,):
            raise ValueError(
                f"field has {values.shape} values, space needs ({self.dof_map.num_dofs},)"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("field has non-finite values")
        object.__setattr__(self, "values", values)

    @property
    def nodal(self) -> np.ndarray:
        """Values reshaped to (nodes, components) for vector/tensor spaces."""
        return self.values.reshape(-1, self.dof_map.num_components)


def _values(obj) -> np.ndarray:
    return obj.values if isinstance(obj, Field) else np.asarray(obj, dtype=float)


class _Pattern:
    """Sparsity pattern of one element-table pair plus the scatter map into it."""

    def __init__(self, rows: np.ndarray, cols: np.ndarray, shape: tuple[int, int]):
        T = rows.shape[0]
        r = np.broadcast_to(rows[:, :, None], (T, rows.shape[1], cols.shape[1]))
        c = np.broadcast_to(cols[:, None, :], (T, rows.shape[1], cols.shape[1]))
        keys = r.ravel().astype(np.int64) * shape[1] + c.ravel()
        unique, self.inverse = np.unique(keys, return_inverse=True)
        self.inverse = self.inverse.reshape(-1)
        self.indices = (unique % shape[1]).astype(np.int32)
        row_of = unique // shape[1]
        self.indptr = np.concatenate([[0], np.cumsum(np.bincount(row_of, minlength=shape[0]))]).astype(np.int32)
        self.shape = shape
        self.nnz = len(unique)

    def assemble(self, local: np.ndarray) -> sp.csr_matrix:
        data = np.bincount(self.inverse, weights=local.ravel(), minlength=self.nnz)
        return sp.csr_matrix((data, self.indices.copy(), self.indptr.copy()), shape=self.shape)


_BARY_GRADS = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])


def _p2_basis(L: np.ndarray):
    """P2 shape functions and their barycentric derivatives at points L (q, 3)."""
    l0, l1, l2 = L[:, 0], L[:, 1], L[:, 2]
    N = np.stack(
        [l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1), 4 * l1 * l2, 4 * l2 * l0, 4 * l0 * l1],
        axis=1,
    )
    q = len(L)
    dN = np.zeros((q, 6, 3))
    for i in range(3):
        dN[:, i, i] = 4 * L[:, i] - 1
    # edge k joins the two vertices other than k
    for k, (a, b) in enumerate([(1, 2), (2, 0), (0, 1)]):
        dN[:, 3 + k, a] = 4 * L[:, b]
        dN[:, 3 + k, b] = 4 * L[:, a]
    return N, dN


class Discretization:
    """All per-mesh data needed to assemble the forms of the coupled system."""

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        self.scalar = build_dof_map(mesh, SpaceKind.P1_SCALAR)
        self.tensor = build_dof_map(mesh, SpaceKind.P1_TENSOR2x2)
        self.velocity = build_dof_map(mesh, SpaceKind.P2_VECTOR2)
        self.pressure = build_dof_map(mesh, SpaceKind.P1_SCALAR_ZERO_MEAN)

        p = mesh.vertices[mesh.triangles]
        J = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)  # columns are edge vectors
        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        if np.any(det <= 0):
            raise ValueError("mesh has non-positive triangle orientation")
        self.area = 0.5 * det
        Jinv = np.linalg.inv(J)
        # grad(lambda_k) = dlambda/dxi_ref @ J^{-1}
        self.grad_lambda = np.einsum("kr,trx->tkx", _BARY_GRADS, Jinv)  # (T, 3, 2)
        self.V = mesh.num_vertices
        self.T = mesh.num_triangles
        self._patterns: dict = {}
        self._basis: dict = {}
        self._cache: dict = {}

    _instances: "weakref.WeakKeyDictionary[Mesh, Discretization]" = weakref.WeakKeyDictionary()

    @classmethod
    def for_mesh(cls, mesh: Mesh) -> "Discretization":
        disc = cls._instances.get(mesh)
        if disc is None:
            disc = cls(mesh)
            cls._instances[mesh] = disc
        return disc

    # ---- quadrature data -------------------------------------------------

    def rule(self, degree: int) -> QuadratureRule:
        return quadrature_rule(degree)

    def weights(self, degree: int) -> np.ndarray:
        """Physical quadrature weights, shape (T, q)."""
        return 2.0 * self.area[:, None] * self.rule(degree).weights[None, :]

    def points(self, degree: int) -> np.ndarray:
        """Physical quadrature points, shape (T, q, 2)."""
        L = self.rule(degree).points
        return np.einsum("qk,tkx->tqx", L, self.mesh.vertices[self.mesh.triangles])

    def p2_basis(self, degree: int):
        """(N (q, 6), grad N (T, q, 6, 2)) at the points of the given rule."""
        if degree not in self._basis:
            N, dN = _p2_basis(self.rule(degree).points)
            grad = np.einsum("qnk,tkx->tqnx", dN, self.grad_lambda)
            self._basis[degree] = (N, grad)
        return self._basis[degree]

    # ---- field evaluation -------------------------------------------------

    def eval_scalar(self, u, degree: int) -> np.ndarray:
        """P1 scalar values at quadrature points, shape (T, q)."""
        return _values(u)[self.mesh.triangles] @ self.rule(degree).points.T

    def grad_scalar(self, u) -> np.ndarray:
        """Elementwise-constant gradient of a P1 scalar, shape (T, 2)."""
        return np.einsum("tk,tkx->tx", _values(u)[self.mesh.triangles], self.grad_lambda)

    def eval_tensor(self, F, degree: int) -> np.ndarray:
        """P1 tensor at quadrature points, shape (T, q, 2, 2)."""
        vals = _values(F).reshape(-1, 4)[self.mesh.triangles]  # (T, 3, 4)
        return np.matmul(self.rule(degree).points, vals).reshape(self.T, -1, 2, 2)

    def grad_tensor(self, F) -> np.ndarray:
        """Elementwise-constant gradient of a P1 tensor: G[t, i, j, c] = d_c F_ij."""
        vals = _values(F).reshape(-1, 4)[self.mesh.triangles]
        return np.einsum("tkm,tkc->tmc", vals, self.grad_lambda).reshape(self.T, 2, 2, 2)

    def eval_vector(self, v, degree: int) -> np.ndarray:
        """P2 vector at quadrature points, shape (T, q, 2)."""
        N, _ = self.p2_basis(degree)
        vals = _values(v).reshape(-1, 2)[self.velocity.element_nodes]  # (T, 6, 2)
        return np.einsum("qn,tnc->tqc", N, vals)

    def grad_vector(self, v, degree: int) -> np.ndarray:
        """Gradient of a P2 vector at quadrature points: G[t, q, c, k] = d_k v_c."""
        _, dN = self.p2_basis(degree)
        vals = _values(v).reshape(-1, 2)[self.velocity.element_nodes]
        return np.einsum("tqnk,tnc->tqck", dN, vals)

    # ---- scatter ----------------------------------------------------------

    def _space(self, name: str) -> DofMap:
        return {"scalar": self.scalar, "tensor": self.tensor, "velocity": self.velocity,
                "pressure": self.pressure}[name]

    def pattern(self, row: str, col: str, scalar_blocks: bool = True) -> _Pattern:
        """Pattern on node tables (``scalar_blocks``) or on full dof tables."""
        key = (row, col, scalar_blocks)
        if key not in self._patterns:
            R, C = self._space(row), self._space(col)
            if scalar_blocks:
                rt, ct = R.element_nodes, C.element_nodes
                shape = (R.num_nodes, C.num_nodes)
            else:
                rt, ct = R.element_dof_table, C.element_dof_table
                shape = (R.num_dofs, C.num_dofs)
            self._patterns[key] = _Pattern(rt, ct, shape)
        return self._patterns[key]

    def scatter_vector(self, space: str, local: np.ndarray, nodal: bool = False) -> np.ndarray:
        S = self._space(space)
        table = S.element_nodes if nodal else S.element_dof_table
        n = S.num_nodes if nodal else S.num_dofs
        return np.bincount(table.ravel(), weights=local.ravel(), minlength=n)

    # ---- cached constant operators ---------------------------------------

    def cached(self, key, build: Callable):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    def p1_mass(self) -> sp.csr_matrix:
        return self.cached("p1_mass", lambda: _p1_mass(self, None))

    def p1_stiffness(self) -> sp.csr_matrix:
        return self.cached("p1_stiff", lambda: _p1_stiffness(self, None))

    def tensor_mass(self) -> sp.csr_matrix:
        return self.cached("t_mass", lambda: sp.kron(self.p1_mass(), sp.eye(4), format="csr"))

    def tensor_stiffness(self) -> sp.csr_matrix:
        return self.cached("t_stiff", lambda: sp.kron(self.p1_stiffness(), sp.eye(4), format="csr"))

    def p1_mass_factor(self) -> Factorization:
        return self.cached("p1_mass_lu", lambda: Factorization(self.p1_mass()))

    def lumped_mass(self) -> np.ndarray:
        """Integrals of the P1 basis functions (pressure-mean weights)."""
        return self.cached("lumped", lambda: np.asarray(self.p1_mass().sum(axis=1)).ravel())

    # ---- nonlinear load/Jacobian helpers ---------------------------------

    def scalar_load(self, f_q: np.ndarray, degree: int) -> np.ndarray:
        """Vector of int f * chi_m for a function given at quadrature points (T, q)."""
        L = self.rule(degree).points
        local = (self.weights(degree) * f_q) @ L
        return self.scatter_vector("scalar", local)

    def scalar_weighted_mass(self, c_q: np.ndarray, degree: int) -> sp.csr_matrix:
        """Matrix of int c * chi_m * chi_n for c given at quadrature points."""
        L = self.rule(degree).points
        local = np.einsum("tq,qm,qn->tmn", self.weights(degree) * c_q, L, L, optimize=True)
        return self.pattern("scalar", "scalar").assemble(local)

    def tensor_load(self, P_q: np.ndarray, degree: int) -> np.ndarray:
        """Vector of int P : Pi over tensor test functions, P given as (T, q, 2, 2)."""
        L = self.rule(degree).points
        local = np.matmul(L.T, self.weights(degree)[:, :, None] * P_q.reshape(self.T, -1, 4))
        return self.scatter_vector("tensor", local)

    def tensor_weighted_mass(self, H_q: np.ndarray, degree: int) -> sp.csr_matrix:
        """Matrix of int (H[dF]) : Pi, H given as (T, q, 2, 2, 2, 2) acting on dF_ab."""
        L = self.rule(degree).points
        Hq = H_q.reshape(self.T, -1, 16)
        LL = np.einsum("qm,qn->qmn", L, L).reshape(len(L), 9)
        # batched (9 x q) @ (q x 16) per element
        local = np.matmul((self.weights(degree)[:, :, None] * LL).transpose(0, 2, 1), Hq)
        local = local.reshape(self.T, 3, 3, 4, 4).transpose(0, 1, 3, 2, 4)
        return self.pattern("tensor", "tensor", scalar_blocks=False).assemble(
            local.reshape(self.T, 12, 12)
        )


def _disc(space_or_disc) -> Discretization:
    if isinstance(space_or_disc, Discretization):
        return space_or_disc
    return Discretization.for_mesh(space_or_disc.mesh)


def _p1_mass(disc: Discretization, coef) -> sp.csr_matrix:
    if coef is None:
        # exact P1 mass: area/12 * (1 + delta_mn)
        local = (disc.area / 12.0)[:, None, None] * (np.ones((3, 3)) + np.eye(3))[None]
    else:
        deg = DEG_MASS + 1
        c_q = disc.eval_scalar(coef, deg)
        L = disc.rule(deg).points
        local = np.einsum("tq,qm,qn->tmn", disc.weights(deg) * c_q, L, L)
    return disc.pattern("scalar", "scalar").assemble(local)


def _p1_stiffness(disc: Discretization, coef) -> sp.csr_matrix:
    w = disc.area if coef is None else disc.area * _values(coef)[disc.mesh.triangles].mean(axis=1)
    local = w[:, None, None] * np.einsum("tmx,tnx->tmn", disc.grad_lambda, disc.grad_lambda)
    return disc.pattern("scalar", "scalar").assemble(local)


def _p2_scalar_mass(disc: Discretization) -> sp.csr_matrix:
    N, _ = disc.p2_basis(DEG_TH)
    local = np.einsum("tq,qm,qn->tmn", disc.weights(DEG_TH), N, N)
    return disc.pattern("velocity", "velocity").assemble(local)


def _p2_scalar_stiffness(disc: Discretization) -> sp.csr_matrix:
    _, dN = disc.p2_basis(DEG_TH)
    local = np.einsum("tq,tqmx,tqnx->tmn", disc.weights(DEG_TH), dN, dN)
    return disc.pattern("velocity", "velocity").assemble(local)


def _check_coefficient(space: DofMap, coefficient):
    if coefficient is None:
        return None
    if isinstance(coefficient, Field) and coefficient.dof_map.space_kind not in (
        SpaceKind.P1_SCALAR, SpaceKind.P1_SCALAR_ZERO_MEAN
    ):
        raise ValueError("coefficient must be a P1 scalar field")
    values = _values(coefficient)
    if values.shape != (space.mesh.num_vertices,):
        raise ValueError("coefficient must be a P1 scalar field on the same mesh")
    if isinstance(coefficient, Field) and coefficient.dof_map.mesh is not space.mesh:
        raise ValueError("coefficient lives on a different mesh")
    return values


def assemble_mass(space: DofMap, coefficient=None) -> sp.csr_matrix:
    """Mass matrix of ``space``, optionally weighted by a P1 scalar coefficient."""
    disc = _disc(space)
    coef = _check_coefficient(space, coefficient)
    kind = space.space_kind
    if kind in (SpaceKind.P1_SCALAR, SpaceKind.P1_SCALAR_ZERO_MEAN):
        return disc.p1_mass() if coef is None else _p1_mass(disc, coef)
    if kind is SpaceKind.P1_TENSOR2x2:
        return sp.kron(_p1_mass(disc, coef) if coef is not None else disc.p1_mass(), sp.eye(4), format="csr")
    if coef is not None:
        raise ValueError("weighted mass is only provided for P1 spaces")
    return sp.kron(_p2_scalar_mass(disc), sp.eye(2), format="csr")


def assemble_stiffness(space: DofMap, coefficient=None) -> sp.csr_matrix:
    """Stiffness matrix of ``space``, optionally weighted by a P1 scalar coefficient."""
    disc = _disc(space)
    coef = _check_coefficient(space, coefficient)
    kind = space.space_kind
    if kind in (SpaceKind.P1_SCALAR, SpaceKind.P1_SCALAR_ZERO_MEAN):
        return disc.p1_stiffness() if coef is None else _p1_stiffness(disc, coef)
    if kind is SpaceKind.P1_TENSOR2x2:
        base = disc.p1_stiffness() if coef is None else _p1_stiffness(disc, coef)
        return sp.kron(base, sp.eye(4), format="csr")
    if coef is not None:
        raise ValueError("weighted stiffness is only provided for P1 spaces")
    return sp.kron(_p2_scalar_stiffness(disc), sp.eye(2), format="csr")


def mobility_stiffness(disc: Discretization, b: Callable, phi) -> sp.csr_matrix:
    """Matrix of int b(phi) grad chi_m . grad chi_n with b evaluated at quadrature points."""
    deg = 2
    w = (disc.weights(deg) * b(disc.eval_scalar(phi, deg))).sum(axis=1)
    local = w[:, None, None] * np.einsum("tmx,tnx->tmn", disc.grad_lambda, disc.grad_lambda)
    return disc.pattern("scalar", "scalar").assemble(local)


def assemble_stokes_blocks(v_space: DofMap, p_space: DofMap, nu: float):
    """Return ``(A, B)`` with ``A = nu * int grad v : grad u`` and ``B[q, u] = -int q div u``."""
    if not nu > 0:
        raise ValueError(f"viscosity must be positive, got {nu}")
    if v_space.mesh is not p_space.mesh:
        raise ValueError("velocity and pressure spaces live on different meshes")
    if v_space.space_kind is not SpaceKind.P2_VECTOR2 or p_space.degree != 1 or p_space.num_components != 1:
        raise ValueError("expected a P2 vector velocity space and a P1 scalar pressure space")
    disc = _disc(v_space)
    A = nu * disc.cached("p2_vec_stiff", lambda: sp.kron(_p2_scalar_stiffness(disc), sp.eye(2), format="csr"))
    A = sp.csr_matrix(A)

    def build_B():
        _, dN = disc.p2_basis(DEG_TH)
        L = disc.rule(DEG_TH).points
        local = -np.einsum("tq,qm,tqnc->tmnc", disc.weights(DEG_TH), L, dN).reshape(disc.T, 3, 12)
        return disc.pattern("pressure", "velocity", scalar_blocks=False).assemble(local)

    return A, disc.cached("stokes_B", build_B)


class StokesProblem:
    """Factored Stokes operator with ``v = 0`` on the boundary and zero-mean pressure.

    Boundary velocity dofs are eliminated (homogeneous data, so no correction
    term is needed); the pressure mean is pinned by one Lagrange multiplier.
    """

    def __init__(self, disc: Discretization, nu: float):
        self.disc = disc
        A, B = assemble_stokes_blocks(disc.velocity, disc.pressure, nu)
        mask = np.ones(disc.velocity.num_dofs, dtype=bool)
        mask[disc.velocity.boundary_dofs] = False
        self.interior = np.flatnonzero(mask)
        self.A, self.B = A, B
        self.solver = SaddlePointSolver(
            A[self.interior][:, self.interior], B[:, self.interior], disc.lumped_mass()
        )

    def solve(self, f: np.ndarray, g: np.ndarray | None = None):
        """Velocity (full vector, zero on the boundary) and zero-mean pressure for load ``f``."""
        v = np.zeros(self.disc.velocity.num_dofs)
        vi, s = self.solver.solve(np.asarray(f)[self.interior], g)
        v[self.interior] = vi
        return v, s


def _cauchy_locals(disc: Discretization, phi, F):
    """Element blocks of the two coupling operators frozen at (phi, F)."""
    deg = DEG_COUPLING
    N, dN = disc.p2_basis(deg)
    L = disc.rule(deg).points
    w = disc.weights(deg)
    gphi = disc.grad_scalar(phi)  # (T, 2)
    # C_phi[(n, c), m] = int d_c phi * lambda_m * N_n
    NL = np.einsum("tq,qn,qm->tnm", w, N, L)
    Cphi = np.einsum("tnm,tc->tncm", NL, gphi).reshape(disc.T, 12, 3)

    Fq = disc.eval_tensor(F, deg)  # (T, q, 2, 2)
    G = disc.grad_tensor(F)  # (T, i, j, c)
    # -int M_ij F_kj d_k u_i  with u = N_n e_c, M = lambda_m e_ij -> delta_ic
    S = np.einsum("tq,qm,tqkj,tqnk->tnmj", w, L, Fq, dN, optimize=True)  # (T, n, m, j)
    CF = np.zeros((disc.T, 6, 2, 3, 2, 2))
    for c in range(2):
        CF[:, :, c, :, c, :] -= S
    # + int d_c F_ij M_ij u_c
    CF += np.einsum("tnm,tijc->tncmij", NL, G)
    return Cphi, CF.reshape(disc.T, 12, 12)


def coupling_operators(disc: Discretization, phi, F):
    """Sparse ``(C_phi, C_F)`` so that the momentum load is ``C_phi @ mu + C_F @ M``.

    ``C_phi.T @ v`` is the advection functional of phi and ``C_F.T @ v`` the
    transport functional of F, which makes the coupling cancel exactly in the
    discrete energy balance.
    """
    Cphi_loc, CF_loc = _cauchy_locals(disc, phi, F)
    Cphi = disc.pattern("velocity", "scalar", scalar_blocks=False).assemble(Cphi_loc)
    CF = disc.pattern("velocity", "tensor", scalar_blocks=False).assemble(CF_loc)
    return Cphi, CF


def assemble_cauchy_rhs(M, F, mu, phi) -> np.ndarray:
    """Momentum load ``int mu grad phi . u - int (M F^T) : grad u + int (grad F . M) . u``.

    Evaluated pointwise (no operator is formed).
    """
    maps = [x.dof_map for x in (M, F, mu, phi) if isinstance(x, Field)]
    if maps and any(m.mesh is not maps[0].mesh for m in maps):
        raise ValueError("fields live on different meshes")
    if not maps:
        raise ValueError("at least one argument must be a Field")
    disc = Discretization.for_mesh(maps[0].mesh)
    deg = DEG_COUPLING
    N, dN = disc.p2_basis(deg)
    w = disc.weights(deg)
    muq = disc.eval_scalar(mu, deg)
    gphi = disc.grad_scalar(phi)
    Mq = disc.eval_tensor(M, deg)
    Fq = disc.eval_tensor(F, deg)
    G = disc.grad_tensor(F)
    body = muq[..., None] * gphi[:, None, :] + np.einsum("tijc,tqij->tqc", G, Mq)
    stress = np.einsum("tqij,tqkj->tqik", Mq, Fq)  # M F^T
    local = np.einsum("tq,qn,tqc->tnc", w, N, body) - np.einsum("tq,tqck,tqnk->tnc", w, stress, dN)
    return disc.scatter_vector("velocity", local.reshape(disc.T, 12))


@dataclass(frozen=True)
class TransportTerms:
    advection: np.ndarray  # int (v . grad) F : Theta
    stretching: np.ndarray  # int (grad v) F : Theta
    operator: sp.csr_matrix  # maps any velocity to advection - stretching for this F

    @property
    def total(self) -> np.ndarray:
        return self.advection - self.stretching


def assemble_transport_terms(v, F) -> TransportTerms:
    """The two trilinear transport couplings of F, tested against tensor functions."""
    if not (isinstance(v, Field) and isinstance(F, Field)):
        raise TypeError("v and F must be Fields")
    if v.dof_map.mesh is not F.dof_map.mesh:
        raise ValueError("fields live on different meshes")
    disc = Discretization.for_mesh(F.dof_map.mesh)
    deg = DEG_COUPLING
    L = disc.rule(deg).points
    w = disc.weights(deg)
    vq = disc.eval_vector(v, deg)
    gv = disc.grad_vector(v, deg)  # d_k v_c
    Fq = disc.eval_tensor(F, deg)
    G = disc.grad_tensor(F)
    adv_q = np.einsum("tqc,tijc->tqij", vq, G)
    str_q = np.einsum("tqik,tqkj->tqij", gv, Fq)
    adv = disc.scatter_vector("tensor", np.einsum("tq,qm,tqij->tmij", w, L, adv_q).reshape(disc.T, 12))
    stre = disc.scatter_vector("tensor", np.einsum("tq,qm,tqij->tmij", w, L, str_q).reshape(disc.T, 12))
    _, CF = coupling_operators(disc, np.zeros(disc.V), F)
    return TransportTerms(adv, stre, sp.csr_matrix(CF.T))


def _callable_values(func, xy: np.ndarray, ncomp: int) -> np.ndarray:
    out = np.asarray(func(xy[..., 0], xy[..., 1]), dtype=float)
    if ncomp == 1:
        return np.broadcast_to(out, xy.shape[:-1])
    if out.shape[-2:] == (2, 2) and ncomp == 4:
        out = out.reshape(out.shape[:-2] + (4,))
    return np.broadcast_to(out, xy.shape[:-1] + (ncomp,))


def project_L2(func, space: DofMap) -> Field:
    """L2 projection of a callable ``func(x, y)`` (or a coefficient vector in ``space``).

    Callables return scalars, 2-vectors or 2x2 tensors (last axes) matching the space.
    """
    disc = _disc(space)
    nc = space.num_components
    deg = DEG_NONLINEAR
    w = disc.weights(deg)
    if not callable(func):
        values = np.asarray(func, dtype=float)
        if values.shape != (space.num_dofs,):
            raise ValueError("nodal data must have one value per dof")
        if space.degree == 1:
            fq = disc.eval_scalar(values, deg) if nc == 1 else disc.eval_tensor(values, deg).reshape(disc.T, -1, 4)
        else:
            fq = disc.eval_vector(values, deg)
    else:
        fq = _callable_values(func, disc.points(deg), nc)
    if space.degree == 1:
        L = disc.rule(deg).points
        fq = fq.reshape(disc.T, -1, nc)
        local = np.einsum("tq,qm,tqc->tmc", w, L, fq)
        rhs = disc.scatter_vector("tensor" if nc == 4 else "scalar", local.reshape(disc.T, -1))
        fact = disc.p1_mass_factor()
        coeffs = np.column_stack([fact.solve(rhs.reshape(-1, nc)[:, c]) for c in range(nc)]).ravel()
    else:
        N, _ = disc.p2_basis(deg)
        local = np.einsum("tq,qn,tqc->tnc", w, N, fq.reshape(disc.T, -1, 2))
        rhs = disc.scatter_vector("velocity", local.reshape(disc.T, -1))
        fact = disc.cached("p2_mass_lu", lambda: Factorization(_p2_scalar_mass(disc)))
        coeffs = np.column_stack([fact.solve(rhs.reshape(-1, 2)[:, c]) for c in range(2)]).ravel()
    return Field(space, coeffs)


def interpolate(func, space: DofMap) -> Field:
    """Nodal interpolant of ``func(x, y)`` in ``space``."""
    xy = space.node_coordinates()
    vals = _callable_values(func, xy, space.num_components)
    return Field(space, np.asarray(vals, dtype=float).reshape(-1).copy())
