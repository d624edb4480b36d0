"""Energies, Lyapunov functionals, conservation and deformation diagnostics.

Gradient norms here are computed element by element straight from the
vertex coordinates, not through the assembled stiffness matrices, so they
serve as an independent re-evaluation of the energy balances.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .assembly import Field
from .energy import EnergyModel
from .quadrature import quadrature_rule

NL_DEGREE = 5


def _vals(x):
    return x.values if isinstance(x, Field) else np.asarray(x, dtype=float)


def _geometry(mesh):
    """Areas and P1 basis gradients via the cross-product formula."""
    p = mesh.vertices[mesh.triangles]
    area = 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                  - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))
    grads = np.empty((len(p), 3, 2))
    for k in range(3):
        a, b = p[:, (k + 1) % 3], p[:, (k + 2) % 3]
        # gradient of the hat function of vertex k is the rotated opposite edge / (2 area)
        grads[:, k, 0] = (a[:, 1] - b[:, 1]) / (2 * area)
        grads[:, k, 1] = (b[:, 0] - a[:, 0]) / (2 * area)
    return area, grads


def grad_norm2_p1(mesh, u, ncomp: int = 1) -> float:
    """||grad u||^2 for a P1 scalar (ncomp=1) or tensor (ncomp=4) field."""
    area, grads = _geometry(mesh)
    vals = _vals(u).reshape(-1, ncomp)[mesh.triangles]  # (T, 3, c)
    g = np.einsum("tkc,tkx->tcx", vals, grads)
    return float(np.sum(area * np.sum(g * g, axis=(1, 2))))


def l2_norm2_p1(mesh, u, ncomp: int = 1) -> float:
    """||u||^2 for P1 data; exact: area/12 (sum u_k^2 + (sum u_k)^2)."""
    area, _ = _geometry(mesh)
    vals = _vals(u).reshape(-1, ncomp)[mesh.triangles]
    s = np.sum(vals * vals, axis=1) + np.sum(vals, axis=1) ** 2
    return float(np.sum(area[:, None] * s) / 12.0)


def weighted_grad_norm2_p1(mesh, u, weight_at_vertices) -> float:
    """int c |grad u|^2 with c linear on each element (exact)."""
    area, grads = _geometry(mesh)
    g = np.einsum("tk,tkx->tx", _vals(u)[mesh.triangles], grads)
    c = np.asarray(weight_at_vertices, dtype=float)[mesh.triangles].mean(axis=1)
    return float(np.sum(area * c * np.sum(g * g, axis=1)))


def grad_norm2_p2(mesh, v) -> float:
    """||grad v||^2 for a P2 vector field; edge-midpoint rule is exact for the quadratic integrand."""
    area, grads = _geometry(mesh)
    V = mesh.num_vertices
    nodes = np.hstack([mesh.triangles, V + mesh.triangle_edges])
    vals = _vals(v).reshape(-1, 2)[nodes]  # (T, 6, 2)
    total = np.zeros(len(area))
    # midpoint of the edge opposite vertex k has barycentric coordinates 1/2 on the other two
    for k in range(3):
        lam = np.full(3, 0.5)
        lam[k] = 0.0
        # d N_i / d lambda at this point, then chain rule with grad lambda
        dN = np.zeros((6, 3))
        for i in range(3):
            dN[i, i] = 4 * lam[i] - 1
        for e, (a, b) in enumerate([(1, 2), (2, 0), (0, 1)]):
            dN[3 + e, a] = 4 * lam[b]
            dN[3 + e, b] = 4 * lam[a]
        gN = np.einsum("nk,tkx->tnx", dN, grads)
        gv = np.einsum("tnc,tnx->tcx", vals, gN)
        total += np.sum(gv * gv, axis=(1, 2)) / 3.0
    return float(np.sum(area * total))


def _quad_points(mesh, degree: int = NL_DEGREE):
    rule = quadrature_rule(degree)
    area, _ = _geometry(mesh)
    w = 2.0 * area[:, None] * rule.weights[None, :]
    return rule.points, w


def integral_of_density(mesh, density, phi, F=None, degree: int = NL_DEGREE) -> float:
    """int density(phi, F) with P1 fields evaluated at the points of a degree-``degree`` rule."""
    L, w = _quad_points(mesh, degree)
    ph = _vals(phi)[mesh.triangles] @ L.T
    if F is None:
        return float(np.sum(w * density(ph)))
    Fq = np.einsum("qk,tkc->tqc", L, _vals(F).reshape(-1, 4)[mesh.triangles]).reshape(ph.shape + (2, 2))
    return float(np.sum(w * density(ph, Fq)))


def mass(mesh, phi) -> float:
    """int phi, exact for P1."""
    area, _ = _geometry(mesh)
    return float(np.sum(area * _vals(phi)[mesh.triangles].mean(axis=1)))


def det_F_field(mesh, F) -> np.ndarray:
    """det F at each element centroid."""
    Fc = _vals(F).reshape(-1, 4)[mesh.triangles].mean(axis=1)
    return Fc[:, 0] * Fc[:, 3] - Fc[:, 1] * Fc[:, 2]


def max_norm(F) -> float:
    """max |F| (Frobenius); for P1 data the maximum is attained at a vertex."""
    vals = _vals(F).reshape(-1, 4)
    return float(np.sqrt(np.max(np.sum(vals * vals, axis=1))))


def energy_ch(mesh, model: EnergyModel, phi) -> float:
    return integral_of_density(mesh, model.psi, phi) + 0.5 * model.eps * grad_norm2_p1(mesh, phi)


def energy_el(mesh, model: EnergyModel, phi, F, lam: float) -> float:
    return integral_of_density(mesh, model.w, phi, F) + 0.5 * lam * grad_norm2_p1(mesh, F, 4)


def lyapunov_cs(mesh, model: EnergyModel, phi, F, lam: float) -> float:
    """int (psi + w) + eps/2 |grad phi|^2 + lam/2 |grad F|^2."""
    return (integral_of_density(mesh, model.j, phi, F)
            + 0.5 * model.eps * grad_norm2_p1(mesh, phi)
            + 0.5 * lam * grad_norm2_p1(mesh, F, 4))


def lyapunov_dsav(mesh, model: EnergyModel, phi, F, beta: float, lam: float,
                  subtract_k: bool = False) -> float:
    """beta^2 + eps/2 |grad phi|^2 + lam/2 |grad F|^2, optionally minus k."""
    value = (beta * beta + 0.5 * model.eps * grad_norm2_p1(mesh, phi)
             + 0.5 * lam * grad_norm2_p1(mesh, F, 4))
    return value - model.k if subtract_k else value


def sav_root(mesh, model: EnergyModel, phi, F) -> float:
    """sqrt(int j(phi, F) + k)."""
    return math.sqrt(integral_of_density(mesh, model.j, phi, F) + model.k)


def dissipation(mesh, model: EnergyModel, old, new, dt: float, nu: float, gamma: float) -> float:
    """dt nu |grad v|^2 + dt gamma |M|^2 + dt int b(phi_n) |grad mu|^2 for the step old -> new."""
    b_vertices = model.mobility(_vals(old.phi))
    if model.constant_mobility:
        bmu = model.b0 * grad_norm2_p1(mesh, new.mu)
    else:
        bmu = weighted_grad_norm2_p1(mesh, new.mu, b_vertices)
    return dt * (nu * grad_norm2_p2(mesh, new.v) + gamma * l2_norm2_p1(mesh, new.M, 4) + bmu)


def numerical_dissipation(mesh, model: EnergyModel, old, new, lam: float) -> float:
    """eps/2 |grad (phi_new - phi_old)|^2 + lam/2 |grad (F_new - F_old)|^2."""
    return (0.5 * model.eps * grad_norm2_p1(mesh, _vals(new.phi) - _vals(old.phi))
            + 0.5 * lam * grad_norm2_p1(mesh, _vals(new.F) - _vals(old.F), 4))


def dsav_energy_identity(mesh, model: EnergyModel, old, new, dt: float, nu: float, gamma: float,
                         lam: float):
    """Both sides of the discrete energy identity of the SAV scheme.

    lhs = dissipation + numerical dissipation + L(new) + (beta_new - beta_old)^2,
    rhs = L(old).
    """
    lhs = (dissipation(mesh, model, old, new, dt, nu, gamma)
           + numerical_dissipation(mesh, model, old, new, lam)
           + lyapunov_dsav(mesh, model, new.phi, new.F, new.beta, lam)
           + (new.beta - old.beta) ** 2)
    rhs = lyapunov_dsav(mesh, model, old.phi, old.F, old.beta, lam)
    return lhs, rhs


def cs_energy_balance(mesh, model: EnergyModel, old, new, dt: float, nu: float, gamma: float,
                      lam: float):
    """Both sides of the discrete energy inequality of the convex-splitting scheme (lhs <= rhs)."""
    lhs = (lyapunov_cs(mesh, model, new.phi, new.F, lam)
           + numerical_dissipation(mesh, model, old, new, lam)
           + dissipation(mesh, model, old, new, dt, nu, gamma))
    rhs = lyapunov_cs(mesh, model, old.phi, old.F, lam)
    return lhs, rhs


@dataclass
class StepReport:
    step: int
    t: float
    L: float
    E_CH: float
    E_EL: float
    mass: float
    phi_min: float
    phi_max: float
    maxF: float
    med_abs_detF_minus_1: float
    beta: float | None
    fp_iters: int
    newton_iters_total: int
    residual: float = 0.0

    def __post_init__(self):
        for k, v in asdict(self).items():
            if isinstance(v, float) and not math.isfinite(v):
                raise ValueError(f"report field {k} is not finite")

    CSV_COLUMNS = ("step", "t", "L", "E_CH", "E_EL", "mass", "phi_min", "phi_max", "maxF",
                   "med_abs_detF_minus_1", "beta", "fp_iters", "newton_iters_total")


def make_report(mesh, model: EnergyModel, state, step: int, lam: float, L: float,
                fp_iters: int = 0, newton_iters: int = 0, residual: float = 0.0) -> StepReport:
    phi = _vals(state.phi)
    det = det_F_field(mesh, state.F)
    return StepReport(
        step=step,
        t=float(state.t),
        L=float(L),
        E_CH=energy_ch(mesh, model, phi),
        E_EL=energy_el(mesh, model, phi, state.F, lam),
        mass=mass(mesh, phi),
        phi_min=float(phi.min()),
        phi_max=float(phi.max()),
        maxF=max_norm(state.F),
        med_abs_detF_minus_1=float(np.median(np.abs(det - 1.0))),
        beta=getattr(state, "beta", None),
        fp_iters=int(fp_iters),
        newton_iters_total=int(newton_iters),
        residual=float(residual),
    )


def tiny_oracle_compare(*args, **kwargs):
    """Compare the sparse pipeline against the dense oracle; see ``chvisco.oracle.compare``."""
    from .oracle import compare

    return compare(*args, **kwargs)
