"""Time-loop orchestration: build a problem from a RunConfig, step it, write outputs."""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import diagnostics as diag
from .assembly import Discretization
from .config import RunConfig, to_ini
from .energy import EnergyModel, ModelKind, build_split_ledger
from .initial import (circles_initial, constant_phase, four_circles, identity_F, random_phase_initial,
                      sheared_F, two_circles)
from .mesh import build_uniform_mesh, refine_local
from .output import CsvLog, snapshot_path, vertex_fields, write_vtk
from .scheme_cs import CsConfig, CsStepper, initial_state
from .scheme_dsav import DsavConfig, DsavStepper, initial_sav_state

log = logging.getLogger(__name__)


@dataclass
class Problem:
    config: RunConfig
    mesh: object
    disc: Discretization
    model: EnergyModel
    state: object
    stepper: object
    ledger: object = None

    def lyapunov(self, state) -> float:
        """L_CS, or L_DSAV with k subtracted so both start near the physical energy."""
        m, cfg = self.mesh, self.config
        if cfg.scheme == "CS":
            return diag.lyapunov_cs(m, self.model, state.phi, state.F, cfg.lam)
        return diag.lyapunov_dsav(m, self.model, state.phi, state.F, state.beta, cfg.lam, subtract_k=True)


@dataclass
class RunResult:
    problem: Problem
    state: object
    reports: list = field(default_factory=list)
    elapsed: float = 0.0


def circle_layout(cfg: RunConfig):
    return (two_circles if cfg.layout == "two" else four_circles)(cfg.radius)


def build_mesh(cfg: RunConfig):
    mesh = build_uniform_mesh(cfg.nx, cfg.ny)
    if cfg.refine == "circles":
        centers, r = circle_layout(cfg)
        centers = np.asarray(centers)
        width = cfg.refine_width if cfg.refine_width is not None else 4.0 / cfg.nx

        def near_boundary(x, y):
            d = np.sqrt((x[..., None] - centers[:, 0]) ** 2 + (y[..., None] - centers[:, 1]) ** 2)
            return np.any(np.abs(d - r) < 0.5 * width, axis=-1)

        mesh = refine_local(mesh, near_boundary)
    return mesh


def build_model(cfg: RunConfig) -> EnergyModel:
    return EnergyModel(ModelKind.SHAPE_MEMORY, beta=cfg.beta, alpha=cfg.alpha, zeta=cfg.zeta, a=cfg.a,
                       b0=cfg.b0, b1=cfg.b1, k=cfg.k)


def initial_fields(cfg: RunConfig, mesh):
    if cfg.initial == "random":
        phi = random_phase_initial(mesh, cfg.mean, cfg.amplitude, cfg.seed, centered=cfg.centered)
    elif cfg.initial == "circles":
        centers, r = circle_layout(cfg)
        phi = circles_initial(mesh, centers, r)
    else:
        phi = constant_phase(mesh, cfg.value)
    F = identity_F(mesh) if cfg.deformation == "identity" else sheared_F(phi, cfg.a)
    return phi, F


def build_problem(cfg: RunConfig) -> Problem:
    mesh = build_mesh(cfg)
    disc = Discretization.for_mesh(mesh)
    model = build_model(cfg)
    phi, F = initial_fields(cfg, mesh)
    if cfg.scheme == "CS":
        ledger = build_split_ledger(model, F_max=cfg.F_max, c0=cfg.c0)
        sc = CsConfig(dt=cfg.dt, nu=cfg.nu, gamma=cfg.gamma, lam=cfg.lam, tol=cfg.tol, max_fp=cfg.max_fp,
                      newton_tol=cfg.newton_tol, newton_max=cfg.newton_max)
        state = initial_state(disc, model, phi, F, cfg.lam)
        return Problem(cfg, mesh, disc, model, state, CsStepper(disc, model, ledger, sc), ledger)
    sc = DsavConfig(dt=cfg.dt, nu=cfg.nu, gamma=cfg.gamma, lam=cfg.lam)
    state = initial_sav_state(disc, model, phi, F)
    return Problem(cfg, mesh, disc, model, state, DsavStepper(disc, model, sc))


def _write_snapshot(problem: Problem, state, step: int, out_dir: str):
    cfg = problem.config
    title = f"chvisco {cfg.scheme} step={step} t={state.t!r} eps={cfg.eps!r}"
    write_vtk(snapshot_path(out_dir, step), problem.mesh, vertex_fields(state), title)


def run(cfg: RunConfig, out_dir: str | None = None, write: bool = True, callback=None) -> RunResult:
    """Step ``cfg.steps`` times; ``callback(step, state, report, info)`` is called after each step.

    Outputs (when ``write``): ``run.ini``, ``metadata.json``, ``series.csv`` and
    VTK snapshots at step 0, every ``vtk_every`` steps, and at the last step.
    """
    out_dir = out_dir or cfg.out_dir
    problem = build_problem(cfg)
    state = problem.state
    result = RunResult(problem, state)
    t0 = time.perf_counter()
    csv_log = None
    if write:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "run.ini"), "w", encoding="utf-8") as fh:
            fh.write(to_ini(cfg))
        meta = {"scheme": cfg.scheme, "eps": cfg.eps, "dt": cfg.dt, "steps": cfg.steps, "seed": cfg.seed,
                "vertices": problem.mesh.num_vertices, "triangles": problem.mesh.num_triangles}
        if problem.ledger is not None:
            meta["c0"] = problem.ledger.c0
        with open(os.path.join(out_dir, "metadata.json"), "w", encoding="utf-8") as fh:
            json.dump(meta, fh, indent=2)
        csv_log = CsvLog(os.path.join(out_dir, "series.csv"))
    try:
        rep = diag.make_report(problem.mesh, problem.model, state, 0, cfg.lam, problem.lyapunov(state))
        result.reports.append(rep)
        if write:
            csv_log.write(rep)
            _write_snapshot(problem, state, 0, out_dir)
        for n in range(1, cfg.steps + 1):
            state, info = problem.stepper.step(state)
            fp = getattr(info, "fp_iters", 0)
            nt = getattr(info, "newton_iters", 0)
            res = getattr(info, "coupled_residual", getattr(info, "residual", 0.0))
            rep = diag.make_report(problem.mesh, problem.model, state, n, cfg.lam, problem.lyapunov(state),
                                   fp, nt, res)
            result.reports.append(rep)
            result.state = state
            if write:
                csv_log.write(rep)
                if n == cfg.steps or (cfg.vtk_every and n % cfg.vtk_every == 0):
                    _write_snapshot(problem, state, n, out_dir)
            if callback is not None:
                callback(n, state, rep, info)
            log.debug("step %d t=%.6g L=%.12g", n, state.t, rep.L)
    finally:
        if csv_log is not None:
            csv_log.close()
    result.elapsed = time.perf_counter() - t0
    return result
