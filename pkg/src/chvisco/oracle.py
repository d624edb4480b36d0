"""Dense reference implementation for tiny meshes.

Nothing here goes through ``assembly``, ``energy`` or the steppers: basis
functions come from Vandermonde inverses in physical coordinates, integrals
from collapsed (Duffy) Gauss rules, and the shape-memory splitting is
restated term by term. Only mesh topology and the public dof numbering are
shared. Whole time steps are solved as one monolithic dense system, so a
match against the sparse pipeline checks the decoupling as well.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .mesh import Mesh

ORACLE_TOL = 1e-9


def duffy_rule(n: int = 6):
    """Points (q, 2) and weights on the reference triangle; exact to degree 2n - 2."""
    x, w = np.polynomial.legendre.leggauss(n)
    x, w = 0.5 * (x + 1.0), 0.5 * w
    u, v = np.meshgrid(x, x, indexing="ij")
    wu, wv = np.meshgrid(w, w, indexing="ij")
    pts = np.column_stack([u.ravel(), (v * (1.0 - u)).ravel()])
    return pts, (wu * wv * (1.0 - u)).ravel()


def _monomials2(p):
    x, y = p[..., 0], p[..., 1]
    one = np.ones_like(x)
    return np.stack([one, x, y, x * x, x * y, y * y], axis=-1)


def _monomials2_grad(p):
    x, y = p[..., 0], p[..., 1]
    z, one = np.zeros_like(x), np.ones_like(x)
    gx = np.stack([z, one, z, 2 * x, y, z], axis=-1)
    gy = np.stack([z, z, one, z, x, 2 * y], axis=-1)
    return np.stack([gx, gy], axis=-1)  # (..., 6, 2)


@dataclass
class _Element:
    verts: np.ndarray  # (3,) vertex ids
    p2nodes: np.ndarray  # (6,) P2 node ids
    area: float
    w: np.ndarray  # (q,) physical weights
    L: np.ndarray  # (q, 3) P1 values
    dL: np.ndarray  # (3, 2) P1 gradients
    N: np.ndarray  # (q, 6) P2 values
    dN: np.ndarray  # (q, 6, 2) P2 gradients


class DenseFE:
    """Per-element P1/P2 data on a small mesh."""

    def __init__(self, mesh: Mesh, n_gauss: int = 6):
        self.mesh = mesh
        self.V = mesh.num_vertices
        self.E = len(mesh.edges)
        ref_pts, ref_w = duffy_rule(n_gauss)
        xy = mesh.vertices
        edge_index = {tuple(sorted(map(int, e))): k for k, e in enumerate(mesh.edges)}
        self.elements = []
        for tri in mesh.triangles:
            X = xy[tri]
            J = np.column_stack([X[1] - X[0], X[2] - X[0]])
            area = 0.5 * abs(np.linalg.det(J))
            q = X[0] + ref_pts @ J.T
            # P1 through the inverse of [1, x, y] at the vertices
            C1 = np.linalg.inv(np.column_stack([np.ones(3), X]))
            L = np.column_stack([np.ones(len(q)), q]) @ C1
            dL = C1[1:].T
            # P2 nodes: vertices, then midpoints of the edges opposite each vertex
            mids, ids = [], []
            for k in range(3):
                a, b = tri[(k + 1) % 3], tri[(k + 2) % 3]
                mids.append(0.5 * (xy[a] + xy[b]))
                ids.append(self.V + edge_index[tuple(sorted((int(a), int(b))))])
            nodes = np.vstack([X, mids])
            C2 = np.linalg.inv(_monomials2(nodes))
            N = _monomials2(q) @ C2
            dN = np.einsum("qmx,mk->qkx", _monomials2_grad(q), C2)
            self.elements.append(_Element(np.asarray(tri), np.concatenate([tri, ids]), area,
                                          2.0 * area * ref_w, L, dL, N, dN))
        self.nv = 2 * (self.V + self.E)
        on_bdry = lambda p: (np.isclose(p[0], 0) or np.isclose(p[0], 1)
                             or np.isclose(p[1], 0) or np.isclose(p[1], 1))
        node_xy = np.vstack([xy, 0.5 * (xy[mesh.edges[:, 0]] + xy[mesh.edges[:, 1]])])
        bnodes = np.array([i for i, p in enumerate(node_xy) if on_bdry(p)], dtype=int)
        self.boundary_velocity = np.sort(np.concatenate([2 * bnodes, 2 * bnodes + 1]))
        self.interior_velocity = np.setdiff1d(np.arange(self.nv), self.boundary_velocity)

    # ---- field evaluation on one element --------------------------------

    def p1(self, el, u):
        return el.L @ u[el.verts]

    def p1_grad(self, el, u):
        return u[el.verts] @ el.dL

    def tensor(self, el, F):
        vals = F.reshape(-1, 4)[el.verts]  # (3, 4)
        return (el.L @ vals).reshape(-1, 2, 2)

    def tensor_grad(self, el, F):
        """G[i, j, c] = d_c F_ij (constant)."""
        vals = F.reshape(-1, 4)[el.verts]
        return np.einsum("kr,kc->rc", vals, el.dL).reshape(2, 2, 2)

    def vector(self, el, v):
        return el.N @ v.reshape(-1, 2)[el.p2nodes]

    def vector_grad(self, el, v):
        """g[q, c, k] = d_k v_c."""
        return np.einsum("qnk,nc->qck", el.dN, v.reshape(-1, 2)[el.p2nodes])

    # ---- dense operators -------------------------------------------------

    def mass(self, coefficient=None):
        A = np.zeros((self.V, self.V))
        for el in self.elements:
            c = 1.0 if coefficient is None else self.p1(el, coefficient)
            A[np.ix_(el.verts, el.verts)] += np.einsum("q,qi,qj->ij", el.w * c, el.L, el.L)
        return A

    def stiffness(self, coefficient=None):
        A = np.zeros((self.V, self.V))
        for el in self.elements:
            c = 1.0 if coefficient is None else self.p1(el, coefficient)
            A[np.ix_(el.verts, el.verts)] += np.sum(el.w * c) * el.dL @ el.dL.T
        return A

    def stokes(self, nu):
        A = np.zeros((self.nv, self.nv))
        B = np.zeros((self.V, self.nv))
        for el in self.elements:
            K = np.einsum("q,qix,qjx->ij", el.w, el.dN, el.dN)
            for c in range(2):
                idx = 2 * el.p2nodes + c
                A[np.ix_(idx, idx)] += nu * K
                B[np.ix_(el.verts, idx)] -= np.einsum("q,qm,qn->mn", el.w, el.L, el.dN[:, :, c])
        return A, B

    def momentum_functional(self, mu, phi, M, F):
        """Vector of int mu grad phi . u - int (M F^T) : grad u + int (grad F : M) . u."""
        out = np.zeros(self.nv)
        for el in self.elements:
            mq = self.p1(el, mu)
            gphi = self.p1_grad(el, phi)
            Mq, Fq = self.tensor(el, M), self.tensor(el, F)
            G = self.tensor_grad(el, F)
            body = mq[:, None] * gphi[None, :] + np.einsum("ijc,qij->qc", G, Mq)
            stress = np.einsum("qij,qkj->qik", Mq, Fq)
            loc = np.einsum("q,qn,qc->nc", el.w, el.N, body) - np.einsum("q,qck,qnk->nc", el.w, stress, el.dN)
            idx = el.p2nodes
            out.reshape(-1, 2)[idx] += loc
        return out

    def transport_functional(self, v, F):
        """Tensor vector of int ((v . grad) F - (grad v) F) : Theta."""
        out = np.zeros((self.V, 4))
        for el in self.elements:
            vq, gv = self.vector(el, v), self.vector_grad(el, v)
            G, Fq = self.tensor_grad(el, F), self.tensor(el, F)
            val = np.einsum("qc,ijc->qij", vq, G) - np.einsum("qik,qkj->qij", gv, Fq)
            out[el.verts] += np.einsum("q,qm,qr->mr", el.w, el.L, val.reshape(-1, 4))
        return out.ravel()

    def advection_functional(self, v, phi):
        """Scalar vector of int (v . grad phi) xi."""
        out = np.zeros(self.V)
        for el in self.elements:
            val = self.vector(el, v) @ self.p1_grad(el, phi)
            out[el.verts] += np.einsum("q,qm,q->m", el.w, el.L, val)
        return out

    def scalar_functional(self, func, *fields):
        """Vector of int func(values at quadrature points) xi for P1 test functions."""
        out = np.zeros(self.V)
        for el in self.elements:
            out[el.verts] += el.L.T @ (el.w * func(el, *fields))
        return out

    def tensor_functional(self, func, *fields):
        out = np.zeros((self.V, 4))
        for el in self.elements:
            out[el.verts] += np.einsum("q,qm,qr->mr", el.w, el.L, func(el, *fields).reshape(-1, 4))
        return out.ravel()

    def integral(self, func, *fields):
        return float(sum(np.sum(el.w * func(el, *fields)) for el in self.elements))

    def pressure_weights(self):
        return self.scalar_functional(lambda el: np.ones(len(el.w)))


# ---- the shape-memory energy, restated -------------------------------------


@dataclass(frozen=True)
class SMParams:
    beta: float = 0.1
    alpha: float = 0.002
    zeta: float = 10.0
    a: float = 0.5
    k: float = 1.0
    c0: float = 1500.0
    b: float = 1.0

    @property
    def eps(self):
        return self.beta * self.alpha

    @property
    def cw(self):
        return self.beta / (4.0 * self.alpha)


def _metric(phi, a):
    s = a * phi
    return np.stack([np.stack([np.ones_like(s), s], -1), np.stack([s, 1.0 + s * s], -1)], -2)


def sm_density(p: SMParams, phi, F):
    C = np.swapaxes(F, -1, -2) @ F
    D = C - _metric(phi, p.a)
    return p.cw * phi**2 * (1 - phi) ** 2 + 0.5 * p.zeta * np.sum(D * D, axis=(-1, -2))


def sm_dF(p: SMParams, phi, F):
    C = np.swapaxes(F, -1, -2) @ F
    return 2.0 * p.zeta * F @ (C - _metric(phi, p.a))


def sm_dphi(p: SMParams, phi, F):
    C = np.swapaxes(F, -1, -2) @ F
    D = C - _metric(phi, p.a)
    dH12 = p.a * np.ones_like(phi)
    dH22 = 2.0 * p.a * p.a * phi
    return (p.cw * 2.0 * phi * (1 - phi) * (1 - 2 * phi)
            - p.zeta * (2.0 * dH12 * D[..., 0, 1] + dH22 * D[..., 1, 1]))


def _cols(F):
    return F[..., :, 0], F[..., :, 1]


def _stack_cols(c1, c2):
    return np.stack([c1, c2], axis=-1)


def cs_stress(p: SMParams, phi_n, F, F_n):
    """Convex-implicit / concave-explicit F-derivative of the elastic density."""
    z, a = p.zeta, p.a
    h_imp = 2.0 * z * F @ (np.swapaxes(F, -1, -2) @ F) + p.c0 * F
    out = h_imp - p.c0 * F_n
    c1, c2 = _cols(F)
    d1, d2 = _cols(F_n)
    zero = np.zeros_like(c1)
    # -zeta C11 and -zeta (1 + a^2 phi^2) C22 have negative weights: lagged
    out = out - z * _stack_cols(2 * d1, zero)
    out = out - (z * (1 + (a * phi_n) ** 2))[..., None, None] * _stack_cols(zero, 2 * d2)
    # the two halves of -2 zeta a phi C12: implicit where their weight is positive
    for sign, weight in ((1.0, -0.5 * z * a * phi_n), (-1.0, 0.5 * z * a * phi_n)):
        s_new, s_old = c1 + sign * c2, d1 + sign * d2
        g_new = 2 * _stack_cols(s_new, sign * s_new)
        g_old = 2 * _stack_cols(s_old, sign * s_old)
        pos = (weight > 0)[..., None, None]
        out = out + weight[..., None, None] * np.where(pos, g_new, g_old)
    return out


def cs_phase_force(p: SMParams, phi, phi_n, F):
    """Convex-implicit / concave-explicit phi-derivative of psi + w at F^{n+1}."""
    z, a, c = p.zeta, p.a, p.cw
    psi = c * (4 * phi**3 - 6 * phi**2 + 3 * phi) - c * phi_n
    m = z * (4 * a * a * phi + 2 * a**4 * phi**3)
    C = np.swapaxes(F, -1, -2) @ F
    return psi + m - 2 * z * a * C[..., 0, 1] - 2 * z * a * a * phi_n * C[..., 1, 1]


# ---- monolithic steps ------------------------------------------------------


@dataclass
class _Layout:
    fe: DenseFE

    def __post_init__(self):
        fe = self.fe
        ni, V = len(fe.interior_velocity), fe.V
        sizes = [("v", ni), ("s", V), ("F", 4 * V), ("M", 4 * V), ("phi", V), ("mu", V)]
        self.slices, start = {}, 0
        for name, n in sizes:
            self.slices[name] = slice(start, start + n)
            start += n
        self.n = start

    def pack(self, v, s, F, M, phi, mu, extra=()):
        return np.concatenate([v[self.fe.interior_velocity], s, F, M, phi, mu, list(extra)])

    def unpack(self, x):
        out = {k: x[sl] for k, sl in self.slices.items()}
        v = np.zeros(self.fe.nv)
        v[self.fe.interior_velocity] = out["v"]
        out["v"] = v
        return out


class DenseSteps:
    def __init__(self, mesh: Mesh, params: SMParams, dt: float, nu: float, gamma: float, lam: float):
        self.fe = DenseFE(mesh)
        self.p, self.dt, self.nu, self.gamma, self.lam = params, dt, nu, gamma, lam
        self.lay = _Layout(self.fe)
        fe = self.fe
        self.Ms, self.Ks = fe.mass(), fe.stiffness()
        self.M4, self.K4 = np.kron(self.Ms, np.eye(4)), np.kron(self.Ks, np.eye(4))
        self.A, self.B = fe.stokes(nu)
        self.c = fe.pressure_weights()

    def _common(self, x, old):
        u = self.lay.unpack(x)
        fe = self.fe
        r_mom_visc = (self.A @ u["v"] + self.B.T @ u["s"])
        return u, r_mom_visc

    def cs_residual(self, x, old):
        fe, p, dt = self.fe, self.p, self.dt
        u, visc = self._common(x, old)
        force = fe.momentum_functional(u["mu"], old["phi"], u["M"], old["F"])
        r_mom = (visc - force)[fe.interior_velocity]
        r_div = self.B @ u["v"]
        r_mean = [self.c @ u["s"]]
        r_F = (self.M4 @ (u["F"] - old["F"]) + dt * fe.transport_functional(u["v"], old["F"])
               + dt * self.gamma * (self.M4 @ u["M"]))
        stress = fe.tensor_functional(
            lambda el: cs_stress(p, fe.p1(el, old["phi"]), fe.tensor(el, u["F"]), fe.tensor(el, old["F"])))
        r_M = self.M4 @ u["M"] - stress - self.lam * (self.K4 @ u["F"])
        r_phi = (self.Ms @ (u["phi"] - old["phi"]) + dt * fe.advection_functional(u["v"], old["phi"])
                 + dt * p.b * (self.Ks @ u["mu"]))
        force_phi = fe.scalar_functional(
            lambda el: cs_phase_force(p, fe.p1(el, u["phi"]), fe.p1(el, old["phi"]), fe.tensor(el, u["F"])))
        r_mu = self.Ms @ u["mu"] - p.eps * (self.Ks @ u["phi"]) - force_phi
        return np.concatenate([r_mom, r_div, r_mean, r_F, r_M, r_phi, r_mu])

    def cs_step(self, old: dict, tol: float = 1e-13, max_iter: int = 60):
        """Newton on the fully coupled step with a finite-difference Jacobian."""
        x = self.lay.pack(old["v"], old["s"], old["F"], old["M"], old["phi"], old["mu"])
        R = self.cs_residual(x, old)
        for _ in range(max_iter):
            if np.max(np.abs(R)) <= tol:
                break
            J = np.empty((len(R), len(x)))
            for i in range(len(x)):
                h = 1e-7 * max(1.0, abs(x[i]))
                e = np.zeros(len(x))
                e[i] = h
                J[:, i] = (self.cs_residual(x + e, old) - self.cs_residual(x - e, old)) / (2 * h)
            x = x + np.linalg.lstsq(J, -R, rcond=None)[0]
            R = self.cs_residual(x, old)
        else:
            raise RuntimeError(f"oracle Newton did not converge (residual {np.max(np.abs(R)):.3e})")
        return self.lay.unpack(x)

    def sav_root(self, phi, F):
        fe, p = self.fe, self.p
        return math.sqrt(fe.integral(lambda el: sm_density(p, fe.p1(el, phi), fe.tensor(el, F))) + p.k)

    def dsav_residual(self, x, old):
        fe, p, dt = self.fe, self.p, self.dt
        u, visc = self._common(x[:-1], old)
        beta = x[-1]
        S = self.sav_root(old["phi"], old["F"])
        A = beta / S
        mom_old = fe.momentum_functional(old["mu"], old["phi"], old["M"], old["F"])
        tr = fe.transport_functional(old["v"], old["F"])
        adv = fe.advection_functional(old["v"], old["phi"])
        dF = fe.tensor_functional(lambda el: sm_dF(p, fe.p1(el, old["phi"]), fe.tensor(el, old["F"])))
        dphi = fe.scalar_functional(lambda el: sm_dphi(p, fe.p1(el, old["phi"]), fe.tensor(el, old["F"])))
        r_mom = (visc - A * mom_old)[fe.interior_velocity]
        r_div = self.B @ u["v"]
        r_mean = [self.c @ u["s"]]
        r_F = self.M4 @ (u["F"] - old["F"]) + dt * A * tr + dt * self.gamma * (self.M4 @ u["M"])
        r_M = self.M4 @ u["M"] - A * dF - self.lam * (self.K4 @ u["F"])
        r_phi = self.Ms @ (u["phi"] - old["phi"]) + dt * A * adv + dt * p.b * (self.Ks @ u["mu"])
        r_mu = self.Ms @ u["mu"] - p.eps * (self.Ks @ u["phi"]) - A * dphi
        r_beta = beta - old["beta"] - (dphi @ (u["phi"] - old["phi"]) + dF @ (u["F"] - old["F"])
                                       + dt * tr @ u["M"] + dt * adv @ u["mu"] - dt * mom_old @ u["v"]) / (2 * S)
        return np.concatenate([r_mom, r_div, r_mean, r_F, r_M, r_phi, r_mu, [r_beta]])

    def dsav_step(self, old: dict):
        """The step is linear in all unknowns including beta: one dense solve."""
        n = self.lay.n + 1
        R0 = self.dsav_residual(np.zeros(n), old)
        J = np.empty((len(R0), n))
        for i in range(n):
            e = np.zeros(n)
            e[i] = 1.0
            J[:, i] = self.dsav_residual(e, old) - R0
        x = np.linalg.lstsq(J, -R0, rcond=None)[0]
        out = self.lay.unpack(x[:-1])
        out["beta"] = float(x[-1])
        return out


# ---- comparison harness ----------------------------------------------------


@dataclass
class OracleReport:
    deviations: dict = field(default_factory=dict)
    tol: float = ORACLE_TOL

    @property
    def failures(self):
        return {k: v for k, v in self.deviations.items() if not v <= self.tol}

    @property
    def passed(self) -> bool:
        return not self.failures

    @property
    def worst(self):
        return max(self.deviations.items(), key=lambda kv: kv[1]) if self.deviations else ("", 0.0)

    def __str__(self):
        lines = [f"{k:>20s}  {v:.3e}  {'ok' if v <= self.tol else 'FAIL'}" for k, v in self.deviations.items()]
        return "\n".join(lines)


def _state_dict(state):
    out = {k: np.asarray(getattr(state, k), dtype=float) for k in ("v", "s", "F", "M", "phi", "mu")}
    if hasattr(state, "beta"):
        out["beta"] = float(state.beta)
    return out


def _dense(A):
    return A.toarray() if hasattr(A, "toarray") else np.asarray(A)


def compare_operators(disc, rng=None, nu: float = 1.0) -> OracleReport:
    """Sparse matrices and functionals against their dense counterparts on random fields."""
    from . import assembly as asm

    rng = rng or np.random.default_rng(0)
    fe = DenseFE(disc.mesh)
    V = fe.V
    phi, mu = rng.uniform(0.1, 0.9, V), rng.normal(size=V)
    F, M = rng.normal(size=4 * V), rng.normal(size=4 * V)
    v = np.zeros(fe.nv)
    v[fe.interior_velocity] = rng.normal(size=len(fe.interior_velocity))
    rep = OracleReport()
    rep.deviations["mass"] = np.abs(_dense(disc.p1_mass()) - fe.mass()).max()
    rep.deviations["stiffness"] = np.abs(_dense(disc.p1_stiffness()) - fe.stiffness()).max()
    A, B = asm.assemble_stokes_blocks(disc.velocity, disc.pressure, nu)
    Ad, Bd = fe.stokes(nu)
    rep.deviations["stokes_A"] = np.abs(_dense(A) - Ad).max()
    rep.deviations["stokes_B"] = np.abs(_dense(B) - Bd).max()
    Cphi, CF = asm.coupling_operators(disc, phi, F)
    rep.deviations["momentum"] = np.abs(Cphi @ mu + CF @ M - fe.momentum_functional(mu, phi, M, F)).max()
    rep.deviations["transport"] = np.abs(CF.T @ v - fe.transport_functional(v, F)).max()
    rep.deviations["advection"] = np.abs(Cphi.T @ v - fe.advection_functional(v, phi)).max()
    return rep


def compare_cs(state_n, config, model, ledger, cs_tol: float = 1e-12, newton_tol: float = 1e-12) -> OracleReport:
    """One convex-splitting step: decoupled sparse pipeline vs monolithic dense Newton."""
    from dataclasses import replace

    from .scheme_cs import CsStepper

    cfg = replace(config, tol=cs_tol, newton_tol=newton_tol)
    new, _ = CsStepper(state_n.disc, model, ledger, cfg).step(state_n)
    params = SMParams(model.beta, model.alpha, model.zeta, model.a, model.k, ledger.c0, model.b0)
    dense = DenseSteps(state_n.disc.mesh, params, cfg.dt, cfg.nu, cfg.gamma, cfg.lam)
    ref = dense.cs_step(_state_dict(state_n))
    rep = OracleReport()
    for k in ("v", "s", "F", "M", "phi", "mu"):
        rep.deviations[f"cs_{k}"] = float(np.max(np.abs(getattr(new, k) - ref[k])))
    return rep


def compare_dsav(state_n, config, model) -> OracleReport:
    """One SAV step: affine decomposition plus scalar solve vs one dense coupled solve."""
    from .scheme_dsav import DsavStepper

    new, _ = DsavStepper(state_n.disc, model, config).step(state_n)
    params = SMParams(model.beta, model.alpha, model.zeta, model.a, model.k, 0.0, model.b0)
    dense = DenseSteps(state_n.disc.mesh, params, config.dt, config.nu, config.gamma, config.lam)
    ref = dense.dsav_step(_state_dict(state_n))
    rep = OracleReport()
    for k in ("v", "s", "F", "M", "phi", "mu"):
        rep.deviations[f"dsav_{k}"] = float(np.max(np.abs(getattr(new, k) - ref[k])))
    rep.deviations["dsav_beta"] = abs(new.beta - ref["beta"])
    return rep


def compare(disc=None, cs=None, dsav=None) -> OracleReport:
    """Merge operator, CS-step and SAV-step comparisons.

    ``cs`` is ``(state, config, model, ledger)`` and ``dsav`` is ``(state, config, model)``.
    """
    rep = OracleReport()
    if disc is not None:
        rep.deviations.update(compare_operators(disc).deviations)
    if cs is not None:
        rep.deviations.update(compare_cs(*cs).deviations)
    if dsav is not None:
        rep.deviations.update(compare_dsav(*dsav).deviations)
    return rep
