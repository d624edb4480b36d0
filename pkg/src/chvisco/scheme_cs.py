"""Convex-splitting time stepper.

Each step solves the fully implicit coupled problem by a fixed-point sweep
over three subproblems: a Stokes solve with the chemical potential and dual
stress frozen, a Newton solve for (F, M) with the velocity frozen, and a
Newton solve for (phi, mu) with velocity and F frozen. Convex parts of the
energy are implicit, concave parts explicit, so every accepted step
decreases the Lyapunov functional.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import diagnostics as diag
from .assembly import DEG_NONLINEAR, Discretization, Field, StokesProblem, coupling_operators, mobility_stiffness
from .energy import EnergyModel, SplitLedger
from .linsolve import Factorization, SolverError, solve_spd

log = logging.getLogger(__name__)


class StepFailure(RuntimeError):
    def __init__(self, message: str, subsystem: str = "", history=None):
        super().__init__(message)
        self.subsystem = subsystem
        self.history = list(history or [])


@dataclass(frozen=True, eq=False)
class State:
    """One time level: velocity, pressure, F, dual stress M, phase phi, chemical potential mu."""

    disc: Discretization
    v: np.ndarray
    s: np.ndarray
    F: np.ndarray
    M: np.ndarray
    phi: np.ndarray
    mu: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        d = self.disc
        sizes = {"v": d.velocity.num_dofs, "s": d.pressure.num_dofs, "F": d.tensor.num_dofs,
                 "M": d.tensor.num_dofs, "phi": d.scalar.num_dofs, "mu": d.scalar.num_dofs}
        for name, n in sizes.items():
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (n,):
                raise ValueError(f"{name} has shape {arr.shape}, expected ({n},)")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite values")
            object.__setattr__(self, name, arr)

    @property
    def mesh(self):
        return self.disc.mesh

    def field(self, name: str) -> Field:
        space = {"v": self.disc.velocity, "s": self.disc.pressure, "F": self.disc.tensor,
                 "M": self.disc.tensor, "phi": self.disc.scalar, "mu": self.disc.scalar}[name]
        return Field(space, getattr(self, name))

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def max_abs_diff(self, other: "State") -> float:
        return max(float(np.max(np.abs(getattr(self, n) - getattr(other, n))))
                   for n in ("v", "s", "F", "M", "phi", "mu"))


@dataclass(frozen=True)
class CsConfig:
    dt: float
    nu: float = 1.0
    gamma: float = 1.0
    lam: float = 0.001
    tol: float = 1e-8
    max_fp: int = 100
    newton_tol: float = 1e-11
    newton_max: int = 25
    max_halvings: int = 10
    # energy / mass checks on every accepted step
    check: bool = True
    energy_rtol: float = 1e-10
    mass_tol: float = 1e-10

    def __post_init__(self):
        if not (self.dt > 0 and self.nu > 0 and self.lam > 0):
            raise ValueError("dt, nu and lam must be positive")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if not (self.tol > 0 and self.max_fp >= 1 and self.newton_tol > 0 and self.newton_max >= 1):
            raise ValueError("iteration controls must be positive")


@dataclass
class StepInfo:
    fp_iters: int = 0
    newton_iters: int = 0
    fp_history: list = field(default_factory=list)
    elasticity_residuals: list = field(default_factory=list)
    ch_residuals: list = field(default_factory=list)
    coupled_residual: float = 0.0
    lyapunov_old: float = 0.0
    lyapunov_new: float = 0.0


def initial_state(disc: Discretization, model: EnergyModel, phi0, F0, lam: float,
                  consistent: bool = True) -> State:
    """State at t = 0 with v = 0, s = 0.

    With ``consistent`` the dual variables solve their defining equations at
    the initial data: ``M = dw/dF - lam Lap F`` and ``mu = psi' + dw/dphi - eps Lap phi``
    (weakly); otherwise they are zero.
    """
    phi0 = np.asarray(phi0.values if isinstance(phi0, Field) else phi0, dtype=float)
    F0 = np.asarray(F0.values if isinstance(F0, Field) else F0, dtype=float)
    M0 = np.zeros(disc.tensor.num_dofs)
    mu0 = np.zeros(disc.scalar.num_dofs)
    if consistent:
        deg = DEG_NONLINEAR
        ph = disc.eval_scalar(phi0, deg)
        Fq = disc.eval_tensor(F0, deg)
        rhs_M = disc.tensor_load(model.dw_dF(ph, Fq), deg) + lam * (disc.tensor_stiffness() @ F0)
        M0 = _tensor_mass_solve(disc, rhs_M)
        rhs_mu = model.eps * (disc.p1_stiffness() @ phi0) + disc.scalar_load(model.dj_dphi(ph, Fq), deg)
        mu0 = disc.p1_mass_factor().solve(rhs_mu)
    return State(disc, np.zeros(disc.velocity.num_dofs), np.zeros(disc.pressure.num_dofs),
                 F0, M0, phi0, mu0, 0.0)


def _tensor_mass_solve(disc: Discretization, rhs: np.ndarray) -> np.ndarray:
    fact = disc.p1_mass_factor()
    r = rhs.reshape(-1, 4)
    return np.column_stack([fact.solve(r[:, c]) for c in range(4)]).ravel()


class CsStepper:
    """Convex-splitting stepper; caches the constant operators of one mesh/parameter set."""

    def __init__(self, disc: Discretization, model: EnergyModel, ledger: SplitLedger, config: CsConfig):
        if ledger.model is not model and ledger.model != model:
            raise ValueError("ledger was built for a different energy model")
        self.disc, self.model, self.ledger, self.cfg = disc, model, ledger, config
        self.mass = disc.p1_mass()
        self.stiff = disc.p1_stiffness()
        self.mass4 = disc.tensor_mass()
        self.stiff4 = disc.tensor_stiffness()
        self.stokes = StokesProblem(disc, config.nu)
        self._Kb_const = model.b0 * self.stiff if model.constant_mobility else None
        # Newton residuals are divided by the lumped mass so the tolerance is in nodal units
        lumped = disc.lumped_mass()
        self._w_ch = np.tile(lumped, 2)
        self._w_el = np.tile(np.repeat(lumped, 4), 2)

    # ---- subproblems -----------------------------------------------------

    def stokes_substep(self, Cphi, CF, mu_k, M_k):
        rhs = Cphi @ mu_k + CF @ M_k
        return self.stokes.solve(rhs)

    def _elastic_parts(self, phi_n, F_n):
        """Explicit load and phase weights of the (F, M) equation, frozen over the step."""
        d, L, deg = self.disc, self.ledger, DEG_NONLINEAR
        ph = d.eval_scalar(phi_n, deg)
        Fq_n = d.eval_tensor(F_n, deg)
        explicit = L.h_minus_prime(Fq_n)
        fplus = []
        for t in L.terms:
            f = t.f(ph)
            fp = np.maximum(f, 0.0)
            fplus.append(fp)
            # (f - [f]_+) multiplies g'_+ at the old level; g_minus = 0
            explicit = explicit + (f - fp)[..., None, None] * t.g_prime(Fq_n)
        return d.tensor_load(explicit, deg), fplus

    def _implicit_elastic(self, F, fplus, jacobian: bool):
        d, L, deg = self.disc, self.ledger, DEG_NONLINEAR
        Fq = d.eval_tensor(F, deg)
        P = L.h_plus_prime(Fq)
        for t, fp in zip(L.terms, fplus):
            P = P + fp[..., None, None] * t.g_prime(Fq)
        load = d.tensor_load(P, deg)
        if not jacobian:
            return load, None
        H = L.h_plus_hessian(Fq)
        for t, fp in zip(L.terms, fplus):
            H = H + fp[..., None, None, None, None] * t.g_hessian()
        return load, d.tensor_weighted_mass(H, deg)

    def elasticity_newton(self, v, F_n, F_guess, M_guess, D, explicit_load, fplus, info: StepInfo | None = None,
                          polish: bool = False):
        """Solve the (F, M) block for a given velocity; returns (F, M, iterations).

        ``polish`` forces one full Newton correction when the guess is already
        within tolerance, so small velocity changes between sweeps still reach F
        and M; without it the sweep difference can drop to exactly zero early.
        """
        cfg = self.cfg
        dt, gam, lam = cfg.dt, cfg.gamma, cfg.lam
        n = self.disc.tensor.num_dofs
        transport = dt * (D @ v)
        M4, K4 = self.mass4, self.stiff4

        def residual(F, M, jac=False):
            load, J = self._implicit_elastic(F, fplus, jac)
            r1 = M4 @ (F - F_n) + transport + dt * gam * (M4 @ M)
            r2 = M4 @ M - load - explicit_load - lam * (K4 @ F)
            return np.concatenate([r1, r2]), J

        # Jacobians are built only when a direction is needed: the Hessian dominates the cost
        jac_at = lambda F: self._implicit_elastic(F, fplus, True)[1]
        F, M = F_guess.copy(), M_guess.copy()
        R, _ = residual(F, M)
        res = self._norm(R, self._w_el)
        history = [res]
        it = 0
        if polish and 0.0 < res <= cfg.newton_tol:
            delta = self._elastic_newton_direction(jac_at(F), R)
            F, M = F + delta[:n], M + delta[n:]
            R, _ = residual(F, M)
            res = self._norm(R, self._w_el)
            it = 1
            history.append(res)
        while res > cfg.newton_tol:
            if it >= cfg.newton_max:
                raise StepFailure(f"elasticity Newton did not converge (residual {res:.3e})",
                                  "elasticity", history)
            try:
                delta = self._elastic_newton_direction(jac_at(F), R)
            except SolverError as exc:
                raise StepFailure(f"elasticity Newton linear solve failed: {exc}", "elasticity", history) from None
            F, M, R, _, res, stalled = self._damped_update(F, M, delta, n, R, res, residual, self._w_el,
                                                           "elasticity", history)
            it += 1
            history.append(res)
            if stalled:
                break
        if info is not None:
            info.elasticity_residuals.append(history)
        return F, M, it

    def _elastic_newton_direction(self, J, R):
        """Solve [[M4, a M4], [-(J + lam K4), M4]] d = -R through its SPD Schur complement.

        With y = M4^-1 r1 the system reduces to (M4 + a (J + lam K4)) dM = r2 + (J + lam K4) y
        and dF = y - a dM; J is symmetric PSD because it is the Hessian of a convex part.
        """
        n = self.disc.tensor.num_dofs
        a = self.cfg.dt * self.cfg.gamma
        r1, r2 = -R[:n], -R[n:]
        y = _tensor_mass_solve(self.disc, r1)
        G = J + self.cfg.lam * self.stiff4
        S = self.mass4 + a * G
        rhs = r2 + G @ y
        try:
            dM = solve_spd(S, rhs, method="cg")
        except SolverError:
            dM = solve_spd(S, rhs, method="direct")
        return np.concatenate([y - a * dM, dM])

    @staticmethod
    def _norm(R, weights):
        return float(np.max(np.abs(R) / weights))

    def _damped_update(self, x1, x2, delta, n, R, res, residual, weights, name, history):
        """Newton update with step halving on the scaled max-norm residual."""
        cfg = self.cfg
        step = 1.0
        for _ in range(cfg.max_halvings + 1):
            y1, y2 = x1 + step * delta[:n], x2 + step * delta[n:]
            Rn, Jn = residual(y1, y2)
            rn = self._norm(Rn, weights)
            if rn < res or rn <= cfg.newton_tol:
                break
            step *= 0.5
        else:
            # no decrease at any step length: accept if we are already at roundoff level
            size = float(np.max(np.abs(delta)))
            scale = max(1.0, float(np.max(np.abs(x1))), float(np.max(np.abs(x2))))
            if size <= 1e-12 * scale or res <= 100.0 * cfg.newton_tol:
                # keep the full correction anyway: returning x unchanged would let the
                # outer sweep see an exact (and false) fixed point
                y1, y2 = x1 + delta[:n], x2 + delta[n:]
                Rn, Jn = residual(y1, y2)
                return y1, y2, Rn, Jn, self._norm(Rn, weights), True
            raise StepFailure(f"{name} Newton line search failed (residual {res:.3e}, update {size:.3e}, scale {scale:.3e})", name, history)
        size = step * float(np.max(np.abs(delta)))
        scale = max(1.0, float(np.max(np.abs(y1))), float(np.max(np.abs(y2))))
        # an update at roundoff level means the residual floor has been reached
        stalled = size <= 1e-14 * scale
        return y1, y2, Rn, Jn, rn, stalled

    def _phase_parts(self, phi_n, F_new):
        """Explicit phase load and g_i(F) at quadrature points for the (phi, mu) equation."""
        d, L, deg = self.disc, self.ledger, DEG_NONLINEAR
        ph_n = d.eval_scalar(phi_n, deg)
        Fq = d.eval_tensor(F_new, deg)
        g = [t.g(Fq) for t in L.terms]
        explicit = L.phase_minus_prime(ph_n)
        for t, gi in zip(L.terms, g):
            explicit = explicit + t.f_minus_prime(ph_n) * gi
        return d.scalar_load(explicit, deg), g

    def _implicit_phase(self, phi, g, jacobian: bool):
        d, L, deg = self.disc, self.ledger, DEG_NONLINEAR
        ph = d.eval_scalar(phi, deg)
        f = L.phase_plus_prime(ph)
        for t, gi in zip(L.terms, g):
            f = f + t.f_plus_prime(ph) * gi
        load = d.scalar_load(f, deg)
        if not jacobian:
            return load, None
        c = L.phase_plus_second(ph)
        for t, gi in zip(L.terms, g):
            c = c + t.f_plus_second() * gi
        return load, d.scalar_weighted_mass(c, deg)

    def cahn_hilliard_newton(self, v, phi_n, phi_guess, mu_guess, Cphi, Kb, explicit_load, g,
                             info: StepInfo | None = None, polish: bool = False):
        """Solve the (phi, mu) block for given velocity and F; returns (phi, mu, iterations)."""
        cfg = self.cfg
        dt, eps = cfg.dt, self.model.eps
        n = self.disc.scalar.num_dofs
        Ms, K = self.mass, self.stiff
        advection = dt * (Cphi.T @ v)

        def residual(phi, mu, jac=False):
            load, J = self._implicit_phase(phi, g, jac)
            r1 = Ms @ (phi - phi_n) + advection + dt * (Kb @ mu)
            r2 = Ms @ mu - eps * (K @ phi) - load - explicit_load
            return np.concatenate([r1, r2]), J

        def jacobian(phi):
            J = self._implicit_phase(phi, g, True)[1]
            return sp.bmat([[Ms, dt * Kb], [-(eps * K + J), Ms]], format="csr")

        phi, mu = phi_guess.copy(), mu_guess.copy()
        R, _ = residual(phi, mu)
        res = self._norm(R, self._w_ch)
        history = [res]
        it = 0
        if polish and 0.0 < res <= cfg.newton_tol:
            delta = Factorization(jacobian(phi)).solve(-R)
            phi, mu = phi + delta[:n], mu + delta[n:]
            R, _ = residual(phi, mu)
            res = self._norm(R, self._w_ch)
            it = 1
            history.append(res)
        while res > cfg.newton_tol:
            if it >= cfg.newton_max:
                raise StepFailure(f"Cahn-Hilliard Newton did not converge (residual {res:.3e})",
                                  "cahn_hilliard", history)
            try:
                delta = Factorization(jacobian(phi)).solve(-R)
            except SolverError as exc:
                raise StepFailure(f"Cahn-Hilliard Newton linear solve failed: {exc}", "cahn_hilliard",
                                  history) from None
            phi, mu, R, _, res, stalled = self._damped_update(phi, mu, delta, n, R, res, residual, self._w_ch,
                                                              "cahn_hilliard", history)
            it += 1
            history.append(res)
            if stalled:
                break
        if info is not None:
            info.ch_residuals.append(history)
        return phi, mu, it

    # ---- full step -------------------------------------------------------

    def step(self, state: State):
        """Advance one step; returns ``(new_state, StepInfo)`` or raises StepFailure."""
        cfg, d = self.cfg, self.disc
        info = StepInfo()
        Cphi, CF = coupling_operators(d, state.phi, state.F)
        D = sp.csr_matrix(CF.T)
        Kb = self._Kb_const if self._Kb_const is not None else mobility_stiffness(d, self.model.mobility, state.phi)
        el_load, fplus = self._elastic_parts(state.phi, state.F)

        cur = state
        for k in range(cfg.max_fp):
            v, s = self.stokes_substep(Cphi, CF, cur.mu, cur.M)
            F, M, it_el = self.elasticity_newton(v, state.F, cur.F, cur.M, D, el_load, fplus, info, polish=k > 0)
            ph_load, g = self._phase_parts(state.phi, F)
            phi, mu, it_ch = self.cahn_hilliard_newton(v, state.phi, cur.phi, cur.mu, Cphi, Kb, ph_load, g, info,
                                                       polish=k > 0)
            nxt = State(d, v, s, F, M, phi, mu, state.t + cfg.dt)
            diff = sum(float(np.max(np.abs(getattr(nxt, n) - getattr(cur, n))))
                       for n in ("v", "s", "F", "M", "phi", "mu"))
            info.fp_history.append(diff)
            info.newton_iters += it_el + it_ch
            prev, cur = cur, nxt
            if diff < cfg.tol:
                break
        else:
            raise StepFailure(f"fixed-point iteration did not converge in {cfg.max_fp} sweeps "
                              f"(last difference {info.fp_history[-1]:.3e})", "fixed_point", info.fp_history)
        info.fp_iters = len(info.fp_history)
        # the momentum equation was solved with the previous sweep's (mu, M)
        mom = Cphi @ (cur.mu - prev.mu) + CF @ (cur.M - prev.M)
        info.coupled_residual = float(np.max(np.abs(mom[self.stokes.interior]))) if info.fp_iters > 1 else 0.0
        if cfg.check:
            self._check(state, cur, info)
        return cur, info

    def _check(self, old: State, new: State, info: StepInfo):
        cfg, m = self.cfg, self.disc.mesh
        fmax = diag.max_norm(new.F)
        if fmax > self.ledger.F_max:
            raise StepFailure(f"max |F| = {fmax:.4g} exceeds F_max = {self.ledger.F_max}; "
                              "the splitting shift c0 no longer guarantees convexity", "invariant")
        dm = abs(diag.mass(m, new.phi) - diag.mass(m, old.phi))
        if dm > cfg.mass_tol:
            raise StepFailure(f"mass changed by {dm:.3e}", "invariant")
        L0 = diag.lyapunov_cs(m, self.model, old.phi, old.F, cfg.lam)
        L1 = diag.lyapunov_cs(m, self.model, new.phi, new.F, cfg.lam)
        info.lyapunov_old, info.lyapunov_new = L0, L1
        if L1 > L0 + cfg.energy_rtol * (1.0 + abs(L0)):
            raise StepFailure(f"Lyapunov functional increased from {L0!r} to {L1!r}", "invariant")
        if info.coupled_residual > 10 * cfg.tol:
            raise StepFailure(f"coupled residual {info.coupled_residual:.3e} exceeds 10 tol", "fixed_point")


def cs_step(state_n: State, config: CsConfig, model: EnergyModel, ledger: SplitLedger,
            stepper: CsStepper | None = None) -> State:
    """One convex-splitting step (builds a throwaway stepper unless one is given)."""
    stepper = stepper or CsStepper(state_n.disc, model, ledger, config)
    return stepper.step(state_n)[0]


def cs_stokes_substep(stepper: CsStepper, state_n: State, mu_k, M_k):
    Cphi, CF = coupling_operators(stepper.disc, state_n.phi, state_n.F)
    return stepper.stokes_substep(Cphi, CF, mu_k, M_k)


def cs_elasticity_newton(stepper: CsStepper, v, state_n: State, F_guess=None, M_guess=None):
    """(F, M, iterations) for frozen velocity ``v``, starting from the old level by default."""
    _, CF = coupling_operators(stepper.disc, state_n.phi, state_n.F)
    load, fplus = stepper._elastic_parts(state_n.phi, state_n.F)
    F0 = state_n.F if F_guess is None else F_guess
    M0 = state_n.M if M_guess is None else M_guess
    info = StepInfo()
    F, M, it = stepper.elasticity_newton(v, state_n.F, F0, M0, sp.csr_matrix(CF.T), load, fplus, info)
    return F, M, it, info.elasticity_residuals[-1]


def cs_cahn_hilliard_newton(stepper: CsStepper, v, F_new, state_n: State):
    """(phi, mu, iterations) for frozen velocity and deformation gradient."""
    d = stepper.disc
    Cphi, _ = coupling_operators(d, state_n.phi, state_n.F)
    Kb = stepper._Kb_const if stepper._Kb_const is not None else mobility_stiffness(d, stepper.model.mobility, state_n.phi)
    load, g = stepper._phase_parts(state_n.phi, F_new)
    info = StepInfo()
    phi, mu, it = stepper.cahn_hilliard_newton(v, state_n.phi, state_n.phi, state_n.mu, Cphi, Kb, load, g, info)
    return phi, mu, it, info.ch_residuals[-1]
