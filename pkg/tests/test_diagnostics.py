import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chvisco import diagnostics as diag
from chvisco.assembly import Discretization
from chvisco.energy import EnergyModel
from chvisco.initial import identity_F, sheared_F
from chvisco.mesh import build_uniform_mesh, refine_local
from chvisco.oracle import DenseFE, SMParams, sm_density
from setups import cs_setup, stationary_fields

MESH = build_uniform_mesh(4, 3)
DISC = Discretization(MESH)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_norms_match_assembled_matrices(seed):
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(DISC.V)
    F = rng.standard_normal(4 * DISC.V)
    assert math.isclose(diag.grad_norm2_p1(MESH, u), u @ DISC.p1_stiffness() @ u, rel_tol=1e-12, abs_tol=1e-13)
    assert math.isclose(diag.l2_norm2_p1(MESH, u), u @ DISC.p1_mass() @ u, rel_tol=1e-12, abs_tol=1e-13)
    assert math.isclose(diag.grad_norm2_p1(MESH, F, 4), F @ DISC.tensor_stiffness() @ F, rel_tol=1e-12,
                        abs_tol=1e-13)
    c = rng.uniform(0.5, 2.0, DISC.V)
    dense = DenseFE(MESH)
    assert math.isclose(diag.weighted_grad_norm2_p1(MESH, u, c), u @ dense.stiffness(c) @ u, rel_tol=1e-12)


def test_p2_gradient_norm_matches_stokes_block():
    rng = np.random.default_rng(3)
    v = rng.standard_normal(DISC.velocity.num_dofs)
    A, _ = DenseFE(MESH).stokes(1.0)
    assert math.isclose(diag.grad_norm2_p2(MESH, v), v @ A @ v, rel_tol=1e-12)


def test_energy_integral_matches_dense_quadrature():
    rng = np.random.default_rng(8)
    phi = rng.uniform(0.1, 0.9, DISC.V)
    F = np.tile([1.0, 0, 0, 1.0], DISC.V) + 0.2 * rng.standard_normal(4 * DISC.V)
    model = EnergyModel()
    dense = DenseFE(MESH)
    prm = SMParams(model.beta, model.alpha, model.zeta, model.a)
    ref = dense.integral(lambda el, u, G: sm_density(prm, dense.p1(el, u), dense.tensor(el, G)), phi, F)
    assert math.isclose(diag.integral_of_density(MESH, model.j, phi, F), ref, rel_tol=1e-12)


def test_mass_and_determinant():
    mesh = build_uniform_mesh(5, 5)
    phi = 0.2 + mesh.vertices[:, 0]
    assert math.isclose(diag.mass(mesh, phi), 0.7, rel_tol=1e-14)
    from chvisco.initial import random_phase_initial
    F = sheared_F(random_phase_initial(mesh, 0.5, 0.5, seed=2), 0.5)  # any shear keeps det 1
    assert np.allclose(diag.det_F_field(mesh, F.values), 1.0, atol=1e-15)
    Fs = np.tile([2.0, 0.0, 0.0, 3.0], mesh.num_vertices)
    assert np.allclose(diag.det_F_field(mesh, Fs), 6.0)
    assert math.isclose(diag.max_norm(Fs), math.sqrt(13.0))


def test_mass_on_locally_refined_mesh():
    mesh = refine_local(build_uniform_mesh(4, 4), lambda x, y: x < 0.3)
    assert math.isclose(diag.mass(mesh, np.ones(mesh.num_vertices)), 1.0, rel_tol=1e-14)


@pytest.mark.parametrize("which", [0, 1])
def test_lyapunov_vanishes_on_minimizers(which):
    mesh = build_uniform_mesh(6, 6)
    model = EnergyModel(k=1.0)
    phi, F = stationary_fields(mesh, which)
    assert abs(diag.lyapunov_cs(mesh, model, phi, F, 1e-3)) <= 1e-14
    beta = diag.sav_root(mesh, model, phi, F)
    assert math.isclose(beta, 1.0, rel_tol=1e-14)
    assert abs(diag.lyapunov_dsav(mesh, model, phi, F, beta, 1e-3, subtract_k=True)) <= 1e-14


def test_lyapunov_of_a_linear_profile():
    # phi = x with F = I: double well integrates to cw / 30, gradient term to eps / 2
    mesh = build_uniform_mesh(16, 16)
    model = EnergyModel(zeta=0.0)
    phi = mesh.vertices[:, 0]
    cw = model.beta / (4 * model.alpha)
    expected = cw / 30.0 + 0.5 * model.eps
    L = diag.lyapunov_cs(mesh, model, phi, identity_F(mesh), 1e-3)
    assert math.isclose(L, expected, rel_tol=1e-12)


def test_report_fields_and_validation():
    disc, model, ledger, cfg, s0, _ = cs_setup(n=4)
    rep = diag.make_report(disc.mesh, model, s0, 0, cfg.lam, 1.0)
    assert rep.beta is None and rep.step == 0
    assert rep.phi_min <= rep.phi_max
    assert math.isclose(rep.mass, diag.mass(disc.mesh, s0.phi))
    with pytest.raises(ValueError):
        diag.StepReport(0, 0.0, float("nan"), 0, 0, 0, 0, 0, 0, 0, None, 0, 0)
