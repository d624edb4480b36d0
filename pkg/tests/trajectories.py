"""Long runs shared by the acceptance criteria, computed once per session.

Steppers run with their internal checks off; every property is asserted
from the recorded series. A step whose nonlinear solve fails is rejected and
retried as two half steps (at most three levels deep); only accepted steps
enter the series.
"""

import dataclasses
import functools
import time

import numpy as np

from chvisco import diagnostics as diag
from chvisco.config import preset
from chvisco.run import build_problem
from chvisco.scheme_cs import CsStepper, StepFailure
from chvisco.scheme_dsav import DsavStepper

SEGREGATION_BAND = 0.4  # |phi - 0.5| > 0.4 counts as separated


@dataclasses.dataclass
class Trajectory:
    label: str
    dt: float
    L: list = dataclasses.field(default_factory=list)
    mass: list = dataclasses.field(default_factory=list)
    E_CH: list = dataclasses.field(default_factory=list)
    t: list = dataclasses.field(default_factory=list)
    bracket: list = dataclasses.field(default_factory=list)
    identity_gap: list = dataclasses.field(default_factory=list)
    accepted: int = 0
    rejected: int = 0
    plateau_step: int | None = None
    state: object = None
    problem: object = None
    elapsed: float = 0.0

    @property
    def L_increments(self):
        L = np.asarray(self.L)
        return np.diff(L), 1e-10 * (1.0 + np.abs(L[:-1]))


def segregation(phi):
    return float(np.mean(np.abs(np.asarray(phi) - 0.5) > SEGREGATION_BAND))


def median_det_deviation(mesh, F):
    return float(np.median(np.abs(diag.det_F_field(mesh, F) - 1.0)))


def _stepper_for(problem, dt, cache):
    if dt not in cache:
        cfg = dataclasses.replace(problem.stepper.cfg, dt=dt, check=False)
        if problem.config.scheme == "CS":
            cache[dt] = CsStepper(problem.disc, problem.model, problem.ledger, cfg)
        else:
            cache[dt] = DsavStepper(problem.disc, problem.model, cfg)
    return cache[dt]


def _advance(problem, traj, state, dt, cache, depth, identity):
    try:
        new, info = _stepper_for(problem, dt, cache).step(state)
    except StepFailure:
        traj.rejected += 1
        if depth >= 3:
            raise
        mid = _advance(problem, traj, state, dt / 2, cache, depth + 1, identity)
        return _advance(problem, traj, mid, dt / 2, cache, depth + 1, identity)
    _record(problem, traj, state, new, info, dt, identity)
    return new


def _record(problem, traj, old, new, info, dt, identity):
    m, cfg = problem.mesh, problem.config
    traj.accepted += 1
    traj.L.append(problem.lyapunov(new))
    traj.mass.append(diag.mass(m, new.phi))
    traj.E_CH.append(diag.energy_ch(m, problem.model, new.phi))
    traj.t.append(new.t)
    if hasattr(info, "bracket"):
        traj.bracket.append(info.bracket)
    if identity:
        lhs, rhs = diag.dsav_energy_identity(m, problem.model, old, new, dt, cfg.nu, cfg.gamma, cfg.lam)
        traj.identity_gap.append(abs(lhs - rhs))


def plateau_reached(E, window=100, rtol=0.02):
    """Relative E_CH decrease over the last ``window`` steps below ``rtol``."""
    return len(E) > window and (E[-window - 1] - E[-1]) <= rtol * abs(E[-1])


@functools.lru_cache(maxsize=None)
def tc1a(scheme="CS", n=32, dt_factor=1.0, gamma=1.0, steps=1000, identity=False, until_plateau=False,
         max_steps=None, seed=0):
    """TC1a on an n x n mesh; with ``until_plateau`` keep going past ``steps`` until E_CH levels off."""
    cfg = preset("TC1a", nx=n, ny=n, scheme=scheme, gamma=gamma, seed=seed)
    cfg = cfg.replace(dt=cfg.dt * dt_factor)
    problem = build_problem(cfg)
    state = problem.state
    traj = Trajectory(f"{scheme} {n}x{n} dt={cfg.dt:g} gamma={gamma:g}", cfg.dt, problem=problem)
    traj.L.append(problem.lyapunov(state))
    traj.mass.append(diag.mass(problem.mesh, state.phi))
    traj.E_CH.append(diag.energy_ch(problem.mesh, problem.model, state.phi))
    traj.t.append(state.t)
    cache = {}
    limit = max_steps if until_plateau else steps
    t0 = time.perf_counter()
    n_step = 0
    while n_step < limit:
        state = _advance(problem, traj, state, cfg.dt, cache, 0, identity)
        n_step += 1
        if until_plateau and n_step >= steps and plateau_reached(traj.E_CH):
            traj.plateau_step = n_step
            break
    traj.state = state
    traj.elapsed = time.perf_counter() - t0
    return traj
