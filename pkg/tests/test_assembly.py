import numpy as np
import pytest
import scipy.sparse as sp
import sympy as sym
from hypothesis import given, settings, strategies as st

from chvisco.assembly import (Discretization, Field, StokesProblem, assemble_cauchy_rhs, assemble_mass,
                              assemble_stiffness, assemble_stokes_blocks, assemble_transport_terms,
                              coupling_operators, interpolate, project_L2)
from chvisco.mesh import SpaceKind, build_dof_map, build_uniform_mesh, mesh_from_arrays, refine_local
from mms import observed_rates, stokes_errors


@pytest.fixture(scope="module")
def disc():
    m = refine_local(build_uniform_mesh(5, 4), lambda x, y: x + y < 0.6)
    return Discretization(m)


def sym_max(A):
    return abs(A - A.T).max()


def test_mass_matrix(disc):
    M = assemble_mass(disc.scalar)
    assert abs(M.sum() - 1.0) < 1e-12
    assert sym_max(M) <= 1e-13 * abs(M).max()
    c = np.full(disc.V, 0.7)
    assert abs(c @ M @ c - 0.49) < 1e-12
    assert abs(assemble_mass(disc.scalar, np.ones(disc.V)) - M).max() < 1e-15
    T = assemble_mass(disc.tensor)
    assert abs(T.sum() - 4.0) < 1e-12
    V = assemble_mass(disc.velocity)
    assert abs(V.sum() - 2.0) < 1e-12


def test_stiffness_matrix(disc):
    K = assemble_stiffness(disc.scalar)
    assert np.max(np.abs(K @ np.ones(disc.V))) < 1e-12
    x = disc.mesh.vertices[:, 0]
    assert abs(x @ K @ x - 1.0) < 1e-12
    assert abs(assemble_stiffness(disc.scalar, np.full(disc.V, 2.5)) - 2.5 * K).max() < 1e-12
    assert sym_max(K) <= 1e-13 * abs(K).max()
    evals = np.linalg.eigvalsh(K.toarray())
    assert evals.min() > -1e-12


def test_weighted_coefficient_checks(disc):
    with pytest.raises(ValueError):
        assemble_mass(disc.scalar, np.ones(3))
    with pytest.raises(ValueError):
        assemble_stiffness(disc.velocity, np.ones(disc.V))


def test_weighted_mass_quadrature_is_exact(disc):
    rng = np.random.default_rng(1)
    c = rng.random(disc.V)
    cq = {d: disc.eval_scalar(c, d) for d in (3, 4, 5)}
    mats = [disc.scalar_weighted_mass(cq[d], d) for d in (3, 4, 5)]
    assert abs(mats[0] - mats[1]).max() < 1e-13 and abs(mats[1] - mats[2]).max() < 1e-13
    assert abs(mats[0] - assemble_mass(disc.scalar, c)).max() < 1e-13


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-3, 3), st.floats(-3, 3))
def test_forms_are_linear_in_frozen_fields(seed, a, b):
    d = Discretization.for_mesh(build_uniform_mesh(3, 3))
    rng = np.random.default_rng(seed)
    p1, p2 = rng.standard_normal((2, d.V))
    F1, F2 = rng.standard_normal((2, 4 * d.V))
    M1 = assemble_mass(d.scalar, a * p1 + b * p2)
    assert abs(M1 - a * assemble_mass(d.scalar, p1) - b * assemble_mass(d.scalar, p2)).max() < 1e-12
    C = coupling_operators(d, a * p1 + b * p2, a * F1 + b * F2)
    Ca, Cb = coupling_operators(d, p1, F1), coupling_operators(d, p2, F2)
    for k in range(2):
        assert abs(C[k] - a * Ca[k] - b * Cb[k]).max() < 1e-11


def test_stokes_blocks_basic(disc):
    A, B = assemble_stokes_blocks(disc.velocity, disc.pressure, 2.0)
    const = np.tile([0.3, -1.2], disc.velocity.num_nodes)
    assert np.max(np.abs(A @ const)) < 1e-12
    assert sym_max(A) <= 1e-13 * abs(A).max()
    rot = interpolate(lambda x, y: np.stack([-y, x], axis=-1), disc.velocity).values
    assert np.max(np.abs(B @ rot)) < 1e-12
    with pytest.raises(ValueError):
        assemble_stokes_blocks(disc.velocity, disc.pressure, 0.0)


def test_stokes_forms_match_symbolic_integrals():
    # both forms are exact on polynomial fields, so compare against sympy integrals over the square
    x, y = sym.symbols("x y")
    u = (x * y - y**2, x**2 + 2 * x * y)
    w = (1 + x**2, x * y)
    q = 3 * x - y + 1
    nu = 0.7
    grad = lambda f: (sym.diff(f, x), sym.diff(f, y))
    a_exact = nu * sum(sum(gu * gw for gu, gw in zip(grad(uc), grad(wc))) for uc, wc in zip(u, w))
    a_exact = float(sym.integrate(a_exact, (x, 0, 1), (y, 0, 1)))
    b_exact = float(sym.integrate(-q * (sym.diff(w[0], x) + sym.diff(w[1], y)), (x, 0, 1), (y, 0, 1)))
    d = Discretization(build_uniform_mesh(2, 2))
    A, B = assemble_stokes_blocks(d.velocity, d.pressure, nu)
    num = lambda e: sym.lambdify((x, y), e, "numpy")
    vec = lambda fs: interpolate(lambda X, Y: np.stack([np.broadcast_to(num(f)(X, Y), np.shape(X)) for f in fs],
                                                       axis=-1), d.velocity).values
    U, W = vec(u), vec(w)
    Q = interpolate(num(q), d.pressure).values
    assert abs(W @ A @ U - a_exact) <= 1e-10
    assert abs(Q @ B @ W - b_exact) <= 1e-10


def test_transport_terms_vanish():
    d = Discretization(build_uniform_mesh(3, 3))
    rng = np.random.default_rng(0)
    F = Field(d.tensor, rng.standard_normal(d.tensor.num_dofs))
    zero_v = Field(d.velocity, np.zeros(d.velocity.num_dofs))
    tt = assemble_transport_terms(zero_v, F)
    assert not tt.advection.any() and not tt.stretching.any()
    I = Field(d.tensor, np.tile([1.0, 0, 0, 1.0], d.V))
    v = Field(d.velocity, rng.standard_normal(d.velocity.num_dofs))
    assert np.max(np.abs(assemble_transport_terms(v, I).advection)) < 1e-14


def test_transport_single_element_by_hand():
    m = mesh_from_arrays(np.array([[0.0, 0.0], [1.0, 0.2], [0.3, 0.9]]), np.array([[0, 1, 2]]))
    d = Discretization(m)
    v = interpolate(lambda x, y: np.stack([np.ones_like(x), np.zeros_like(x)], axis=-1), d.velocity)
    F = interpolate(lambda x, y: x[..., None, None] * np.eye(2), d.tensor)
    tt = assemble_transport_terms(v, F)
    area = 0.5 * (1.0 * 0.9 - 0.2 * 0.3)
    # d_x F = I and int lambda_m = area / 3, so only the diagonal components are hit
    expected = np.tile([1.0, 0.0, 0.0, 1.0], 3) * area / 3
    assert np.allclose(tt.advection, expected, atol=1e-15)
    assert np.max(np.abs(tt.stretching)) < 1e-15
    assert np.allclose(tt.operator @ v.values, tt.total)


def test_cauchy_rhs_special_cases():
    d = Discretization(build_uniform_mesh(4, 4))
    zeroT = Field(d.tensor, np.zeros(d.tensor.num_dofs))
    I = Field(d.tensor, np.tile([1.0, 0, 0, 1.0], d.V))
    mu = Field(d.scalar, np.random.default_rng(2).standard_normal(d.V))
    const = Field(d.scalar, np.full(d.V, 0.4))
    assert not assemble_cauchy_rhs(zeroT, I, mu, const).any()
    # mu = 1, phi = x: int d_x phi u_x = int u_x, and int N_n is 0 at vertices, area/3 at midpoints
    x = Field(d.scalar, d.mesh.vertices[:, 0].copy())
    one = Field(d.scalar, np.ones(d.V))
    rhs = assemble_cauchy_rhs(zeroT, I, one, x).reshape(-1, 2)
    node_int = np.zeros(d.velocity.num_nodes)
    np.add.at(node_int, d.velocity.element_nodes[:, 3:].ravel(), np.repeat(d.area / 3, 3))
    assert np.allclose(rhs[:, 0], node_int, atol=1e-15) and np.max(np.abs(rhs[:, 1])) < 1e-15
    # constant F and M: the body term drops and the stress term only sees the boundary
    Fc = Field(d.tensor, np.tile([1.2, 0.3, -0.1, 0.9], d.V))
    Mc = Field(d.tensor, np.tile([0.5, -2.0, 1.0, 0.25], d.V))
    rhs = assemble_cauchy_rhs(Mc, Fc, Field(d.scalar, np.zeros(d.V)), x)
    interior = np.setdiff1d(np.arange(d.velocity.num_dofs), d.velocity.boundary_dofs)
    assert np.max(np.abs(rhs[interior])) < 1e-13


def test_coupling_operators_reproduce_pointwise_forms():
    d = Discretization(build_uniform_mesh(3, 4))
    rng = np.random.default_rng(5)
    phi, mu = rng.standard_normal((2, d.V))
    F, M = rng.standard_normal((2, 4 * d.V))
    Cphi, CF = coupling_operators(d, phi, F)
    f = Field
    rhs = assemble_cauchy_rhs(f(d.tensor, M), f(d.tensor, F), f(d.scalar, mu), f(d.scalar, phi))
    assert np.allclose(Cphi @ mu + CF @ M, rhs, atol=1e-13)
    v = rng.standard_normal(d.velocity.num_dofs)
    tt = assemble_transport_terms(f(d.velocity, v), f(d.tensor, F))
    assert np.allclose(CF.T @ v, tt.total, atol=1e-13)


def test_project_constant_and_idempotent(disc):
    assert np.allclose(project_L2(lambda x, y: 0.3 + 0 * x, disc.scalar).values, 0.3, atol=1e-12)
    x = project_L2(lambda x, y: x, disc.scalar).values
    assert np.allclose(x, disc.mesh.vertices[:, 0], atol=1e-10)
    rng = np.random.default_rng(0)
    T = rng.standard_normal(disc.tensor.num_dofs)
    assert np.allclose(project_L2(T, disc.tensor).values, T, atol=1e-10)
    V = rng.standard_normal(disc.velocity.num_dofs)
    assert np.allclose(project_L2(V, disc.velocity).values, V, atol=1e-10)


def test_project_converges_at_second_order():
    errs = []
    for n in (8, 16):
        d = Discretization(build_uniform_mesh(n, n))
        u = project_L2(lambda x, y: np.sin(np.pi * x), d.scalar)
        w = d.weights(5)
        e = d.eval_scalar(u, 5) - np.sin(np.pi * d.points(5)[..., 0])
        errs.append(np.sqrt(np.sum(w * e * e)))
    assert 3.6 < errs[0] / errs[1] < 4.4


def test_stokes_zero_load():
    d = Discretization(build_uniform_mesh(6, 6))
    stokes = StokesProblem(d, 1.0)
    v, s = stokes.solve(np.zeros(d.velocity.num_dofs))
    assert not v.any() and not s.any()


def test_stokes_converges_for_nonpolynomial_pressure():
    # a pressure outside P1 shows the textbook Taylor-Hood pressure order
    e = [stokes_errors(n, "trig") for n in (8, 16, 32)]
    assert np.all(np.abs(observed_rates([p for _, p in e]) - 2.0) < 0.3)
    assert np.all(observed_rates([v for v, _ in e]) > 2.7)
