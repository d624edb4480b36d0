import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from chvisco.assembly import Discretization, StokesProblem, interpolate
from chvisco.linsolve import (Factorization, SolverError, as_csr, solve_general, solve_saddle,
                              solve_spd)
from chvisco.mesh import build_uniform_mesh


def test_identity():
    b = np.arange(5.0)
    assert np.allclose(solve_spd(sp.eye(5), b), b)


def test_hand_2x2():
    A = sp.csr_matrix([[2.0, 1.0], [1.0, 2.0]])
    for method in ("direct", "cg"):
        assert np.allclose(solve_spd(A, np.array([3.0, 3.0]), method=method), [1.0, 1.0])


def test_permutation():
    A = sp.csr_matrix([[0.0, 1.0], [1.0, 0.0]])
    assert np.allclose(solve_general(A, np.array([1.0, 2.0])), [2.0, 1.0])
    P = sp.csr_matrix(np.eye(6)[[3, 0, 5, 1, 4, 2]])
    b = np.arange(6.0)
    assert np.allclose(P @ solve_general(P, b), b)


def test_random_sparse_vs_dense():
    rng = np.random.default_rng(3)
    A = sp.random(50, 50, density=0.1, random_state=4) + 10 * sp.eye(50)
    b = rng.standard_normal(50)
    x = solve_general(A, b)
    assert np.max(np.abs(x - np.linalg.solve(A.toarray(), b))) <= 1e-9


def test_singular_detected():
    A = sp.csr_matrix([[1.0, 2.0], [2.0, 4.0]])
    with pytest.raises(SolverError):
        solve_general(A, np.ones(2))


def test_nonfinite_rejected():
    with pytest.raises(SolverError):
        as_csr(sp.csr_matrix([[np.nan]]))


@pytest.mark.parametrize("tol", [0.0, 1e-3, -1.0])
def test_tolerance_range(tol):
    with pytest.raises(ValueError):
        solve_spd(sp.eye(2), np.ones(2), rel_tol=tol)


def test_stiffness_plus_mass_recovers_interpolant():
    disc = Discretization(build_uniform_mesh(8, 8))
    A = disc.p1_stiffness() + disc.p1_mass()
    x = interpolate(lambda x, y: np.sin(3 * x) * y, disc.scalar).values
    b = A @ x
    for method in ("direct", "cg"):
        got = solve_spd(A, b, method=method)
        assert np.linalg.norm(A @ got - b) <= 1e-12 * np.linalg.norm(b)
        assert np.max(np.abs(got - x)) < 1e-9


@settings(max_examples=15, deadline=None)
@given(st.integers(2, 500), st.integers(0, 2**31 - 1))
def test_direct_and_cg_agree(n, seed):
    rng = np.random.default_rng(seed)
    R = sp.random(n, n, density=min(1.0, 5.0 / n), random_state=seed)
    A = R @ R.T + sp.eye(n)
    b = rng.standard_normal(n)
    xd = solve_spd(A, b)
    xc = solve_spd(A, b, method="cg")
    assert np.max(np.abs(xd - xc)) <= 1e-8 * max(1.0, np.max(np.abs(xd)))


def test_factorization_reused():
    A = sp.csr_matrix(np.array([[4.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 2.0]]))
    f = Factorization(A)
    for b in np.eye(3):
        assert np.linalg.norm(A @ f.solve(b) - b) <= 1e-12


def _stokes(n=4):
    disc = Discretization(build_uniform_mesh(n, n))
    st_ = StokesProblem(disc, 1.0)
    A = st_.A[st_.interior][:, st_.interior]
    B = st_.B[:, st_.interior]
    return disc, st_, A, B


def test_saddle_zero_load():
    disc, _, A, B = _stokes()
    v, p = solve_saddle(A, B, np.zeros(A.shape[0]), mean_weights=disc.lumped_mass())
    assert not v.any() and not p.any()


def test_saddle_residuals_and_zero_mean():
    disc, _, A, B = _stokes()
    rng = np.random.default_rng(0)
    f = rng.standard_normal(A.shape[0])
    c = disc.lumped_mass()
    v, p = solve_saddle(A, B, f, mean_weights=c)
    assert np.linalg.norm(A @ v + B.T @ p - f) <= 1e-12 * np.linalg.norm(f)
    assert np.linalg.norm(B @ v) <= 1e-12 * np.linalg.norm(f)
    assert abs(c @ p) <= 1e-12


def test_gradient_force_is_absorbed_by_pressure():
    # a pure pressure-gradient load: the velocity vanishes and s recovers q up to its mean
    disc, st_, _, _ = _stokes(6)
    q = interpolate(lambda x, y: x * x + y, disc.pressure).values
    f = st_.B.T @ q
    v, s = st_.solve(f)
    c = disc.lumped_mass()
    assert np.max(np.abs(v)) < 1e-12
    assert np.allclose(s, q - (c @ q) / c.sum(), atol=1e-11)
    assert abs(c @ s) < 1e-12
