"""Decoupled scalar-auxiliary-variable (SAV) time stepper.

The nonlinear energy enters only through ``beta = sqrt(int j + k)``, and all
couplings are lagged and scaled by one scalar ``A = beta_new / S``. Every
unknown is affine in ``A``:

    x = x0 + A * x1,

where the zero-order parts solve decoupled gradient-flow problems and the
first-order parts carry the energy derivatives and the lagged transport.
``A`` then follows from a single scalar equation.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import diagnostics as diag
from .assembly import DEG_NONLINEAR, Discretization, Field, StokesProblem, coupling_operators, mobility_stiffness
from .energy import EnergyModel
from .linsolve import Factorization, SolverError
from .scheme_cs import State, StepFailure

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SavState(State):
    beta: float = 1.0

    def __post_init__(self):
        super().__post_init__()
        if not (math.isfinite(self.beta) and self.beta > 0):
            raise ValueError(f"beta must be positive, got {self.beta}")


@dataclass(frozen=True)
class DsavConfig:
    dt: float
    nu: float = 1.0
    gamma: float = 1.0
    lam: float = 0.001
    check: bool = True
    energy_rtol: float = 1e-10
    mass_tol: float = 1e-10
    residual_tol: float = 1e-10

    def __post_init__(self):
        if not (self.dt > 0 and self.nu > 0 and self.lam > 0):
            raise ValueError("dt, nu and lam must be positive")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")


@dataclass
class Partials:
    """Zero- and first-order pieces of one step plus the data needed for ``A``."""

    F0: np.ndarray
    M0: np.ndarray
    phi0: np.ndarray
    mu0: np.ndarray
    v1: np.ndarray
    s1: np.ndarray
    F1: np.ndarray
    M1: np.ndarray
    phi1: np.ndarray
    mu1: np.ndarray
    S: float
    load_F: np.ndarray  # int dw/dF(phi_n, F_n) : Theta
    load_phi: np.ndarray  # int dj/dphi(phi_n, F_n) xi
    transport_F: np.ndarray  # D(v_n) = C_F^T v_n
    advection_phi: np.ndarray  # C_phi^T v_n
    momentum: np.ndarray  # C_phi mu_n + C_F M_n

    @property
    def v0(self):
        return np.zeros_like(self.v1)


@dataclass
class DsavInfo:
    A: float = 1.0
    bracket: float = 0.0
    lyapunov_old: float = 0.0
    lyapunov_new: float = 0.0
    residual: float = 0.0
    beta_drift: float = 0.0


def initial_sav_state(disc: Discretization, model: EnergyModel, phi0, F0) -> SavState:
    """v, s, mu, M start at zero; beta at the square root of the shifted energy."""
    phi0 = np.asarray(phi0.values if isinstance(phi0, Field) else phi0, dtype=float)
    F0 = np.asarray(F0.values if isinstance(F0, Field) else F0, dtype=float)
    nv, ns = disc.velocity.num_dofs, disc.pressure.num_dofs
    beta = diag.sav_root(disc.mesh, model, phi0, F0)
    return SavState(disc, np.zeros(nv), np.zeros(ns), F0, np.zeros_like(F0), phi0,
                    np.zeros_like(phi0), 0.0, beta)


class DsavStepper:
    """Caches the constant factorizations; every step is a handful of linear solves."""

    def __init__(self, disc: Discretization, model: EnergyModel, config: DsavConfig):
        self.disc, self.model, self.cfg = disc, model, config
        self.mass = disc.p1_mass()
        self.stiff = disc.p1_stiffness()
        self.stokes = StokesProblem(disc, config.nu)
        dt = config.dt
        # (F_c, M_c) for one tensor component: [[Mass, dt gamma Mass], [-lam K, Mass]]
        self.el_matrix = sp.bmat([[self.mass, dt * config.gamma * self.mass],
                                  [-config.lam * self.stiff, self.mass]], format="csr")
        self.el_fact = Factorization(self.el_matrix)
        self._ch_cache = None
        if model.constant_mobility:
            self._ch_cache = self._ch_factor(model.b0 * self.stiff)

    def _ch_factor(self, Kb):
        A = sp.bmat([[self.mass, self.cfg.dt * Kb], [-self.model.eps * self.stiff, self.mass]], format="csr")
        return Kb, A, Factorization(A)

    def _solve_el(self, r1, r2):
        """Solve the (F, M) block for tensor right-hand sides, one component at a time."""
        V = self.disc.scalar.num_dofs
        r1, r2 = r1.reshape(V, 4), r2.reshape(V, 4)
        F, M = np.empty((V, 4)), np.empty((V, 4))
        for c in range(4):
            x = self.el_fact.solve(np.concatenate([r1[:, c], r2[:, c]]))
            F[:, c], M[:, c] = x[:V], x[V:]
        return F.ravel(), M.ravel()

    def solve_subsystems(self, state: SavState) -> Partials:
        d, model, dt = self.disc, self.model, self.cfg.dt
        V = d.scalar.num_dofs
        try:
            Cphi, CF = coupling_operators(d, state.phi, state.F)
            momentum = Cphi @ state.mu + CF @ state.M
            transport_F = CF.T @ state.v
            advection_phi = Cphi.T @ state.v

            deg = DEG_NONLINEAR
            ph = d.eval_scalar(state.phi, deg)
            Fq = d.eval_tensor(state.F, deg)
            load_F = d.tensor_load(model.dw_dF(ph, Fq), deg)
            load_phi = d.scalar_load(model.dj_dphi(ph, Fq), deg)
            S = diag.sav_root(d.mesh, model, state.phi, state.F)

            # Stokes: zero order vanishes identically
            v1, s1 = self.stokes.solve(momentum)

            # both orders share the factored operator, only the right-hand sides differ
            F0, M0 = self._solve_el(d.tensor_mass() @ state.F, np.zeros(4 * V))
            F1, M1 = self._solve_el(-dt * transport_F, load_F)

            Kb, _, ch = self._ch_cache or self._ch_factor(mobility_stiffness(d, model.mobility, state.phi))
            x0 = ch.solve(np.concatenate([self.mass @ state.phi, np.zeros(V)]))
            x1 = ch.solve(np.concatenate([-dt * advection_phi, load_phi]))
        except SolverError as exc:
            raise StepFailure(f"SAV subsystem solve failed: {exc}", "linear") from None
        return Partials(F0, M0, x0[:V], x0[V:], v1, s1, F1, M1, x1[:V], x1[V:], S,
                        load_F, load_phi, transport_F, advection_phi, momentum)

    def compute_sav_coefficient(self, p: Partials, state: SavState):
        """Return ``(A, beta_next, bracket)``; the bracket is ``(S - T1 / (2 S)) / dt``."""
        dt, S = self.cfg.dt, p.S
        T0 = (p.load_phi @ (p.phi0 - state.phi) + p.load_F @ (p.F0 - state.F)
              + dt * (p.transport_F @ p.M0) + dt * (p.advection_phi @ p.mu0))
        T1 = (p.load_phi @ p.phi1 + p.load_F @ p.F1
              + dt * (p.transport_F @ p.M1) + dt * (p.advection_phi @ p.mu1)
              - dt * (p.momentum @ p.v1))
        bracket = (S - T1 / (2.0 * S)) / dt
        if not (bracket > 0 and math.isfinite(bracket)):
            raise StepFailure(f"SAV bracket is not positive ({bracket!r})", "sav_coefficient")
        A = (state.beta + T0 / (2.0 * S)) / (dt * bracket)
        return A, A * S, bracket

    def reconstruct(self, p: Partials, A: float, state: SavState, beta_next: float) -> SavState:
        if not beta_next > 0:
            raise StepFailure(f"SAV variable would become non-positive ({beta_next!r})", "sav_coefficient")
        return reconstruct(p, A, state, self.cfg, beta_next)

    def residual(self, old: SavState, new: SavState, p: Partials, A: float) -> float:
        """Max-norm residual of the coupled linear step equations at the reconstructed state."""
        d, cfg = self.disc, self.cfg
        dt, lam, eps = cfg.dt, cfg.lam, self.model.eps
        M4 = d.tensor_mass()
        K4 = d.tensor_stiffness()
        Kb = self._ch_cache[0] if self._ch_cache else mobility_stiffness(d, self.model.mobility, old.phi)
        st = self.stokes
        r_mom = (st.A @ new.v + st.B.T @ new.s - A * p.momentum)[st.interior]
        r_div = st.B @ new.v
        r_F = M4 @ (new.F - old.F) + dt * A * p.transport_F + dt * cfg.gamma * (M4 @ new.M)
        r_M = M4 @ new.M - A * p.load_F - lam * (K4 @ new.F)
        r_phi = self.mass @ (new.phi - old.phi) + dt * A * p.advection_phi + dt * (Kb @ new.mu)
        r_mu = self.mass @ new.mu - eps * (self.stiff @ new.phi) - A * p.load_phi
        r_beta = (new.beta - old.beta - (p.load_phi @ (new.phi - old.phi) + p.load_F @ (new.F - old.F)
                                         + dt * (p.transport_F @ new.M) + dt * (p.advection_phi @ new.mu)
                                         - dt * (p.momentum @ new.v)) / (2.0 * p.S))
        return max(float(np.max(np.abs(r))) for r in (r_mom, r_div, r_F, r_M, r_phi, r_mu, [r_beta]))

    def step(self, state: SavState):
        info = DsavInfo()
        p = self.solve_subsystems(state)
        A, beta, bracket = self.compute_sav_coefficient(p, state)
        new = self.reconstruct(p, A, state, beta)
        info.A, info.bracket = A, bracket
        m = self.disc.mesh
        info.beta_drift = abs(beta**2 - diag.sav_root(m, self.model, new.phi, new.F) ** 2)
        if self.cfg.check:
            self._check(state, new, p, A, info)
        return new, info

    def _check(self, old, new, p, A, info):
        cfg, m = self.cfg, self.disc.mesh
        info.residual = self.residual(old, new, p, A)
        if info.residual > cfg.residual_tol:
            raise StepFailure(f"SAV step residual {info.residual:.3e} exceeds {cfg.residual_tol}", "linear")
        dm = abs(diag.mass(m, new.phi) - diag.mass(m, old.phi))
        if dm > cfg.mass_tol:
            raise StepFailure(f"mass changed by {dm:.3e}", "invariant")
        L0 = diag.lyapunov_dsav(m, self.model, old.phi, old.F, old.beta, cfg.lam)
        L1 = diag.lyapunov_dsav(m, self.model, new.phi, new.F, new.beta, cfg.lam)
        info.lyapunov_old, info.lyapunov_new = L0, L1
        if L1 > L0 + cfg.energy_rtol * (1.0 + abs(L0)):
            raise StepFailure(f"SAV Lyapunov functional increased from {L0!r} to {L1!r}", "invariant")


def dsav_step(state_n: SavState, config: DsavConfig, model: EnergyModel,
              stepper: DsavStepper | None = None) -> SavState:
    stepper = stepper or DsavStepper(state_n.disc, model, config)
    return stepper.step(state_n)[0]


def solve_subsystems(state_n: SavState, config: DsavConfig, model: EnergyModel) -> Partials:
    return DsavStepper(state_n.disc, model, config).solve_subsystems(state_n)


def compute_sav_coefficient(partials: Partials, state_n: SavState, config: DsavConfig, model: EnergyModel):
    return DsavStepper(state_n.disc, model, config).compute_sav_coefficient(partials, state_n)


def reconstruct(partials: Partials, A: float, state_n: SavState, config: DsavConfig,
                beta_next: float | None = None) -> SavState:
    """Affine combination ``x0 + A x1``; ``beta_next`` defaults to ``A * S``."""
    beta = A * partials.S if beta_next is None else beta_next
    d = state_n.disc
    return SavState(d, A * partials.v1, A * partials.s1, partials.F0 + A * partials.F1,
                    partials.M0 + A * partials.M1, partials.phi0 + A * partials.phi1,
                    partials.mu0 + A * partials.mu1, state_n.t + config.dt, beta)


def with_beta(state: State, beta: float) -> SavState:
    return SavState(**{f.name: getattr(state, f.name) for f in dataclasses.fields(State)}, beta=beta)
