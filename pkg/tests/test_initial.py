import numpy as np
import pytest

from chvisco.initial import (check_circles, circles_initial, four_circles, random_phase_initial, sheared_F,
                             splitmix64, two_circles, uniform01)
from chvisco.mesh import build_uniform_mesh

MESH = build_uniform_mesh(16, 16)


def test_splitmix64_reference_vector():
    expected = [6457827717110365317, 3203168211198807973, 9817491932198370423,
                4593380528125082431, 16408922859458223821]
    assert [int(x) for x in splitmix64(1234567, 5)] == expected


def test_uniform_draws_in_unit_interval():
    u = uniform01(42, 100000)
    assert u.min() >= 0.0 and u.max() < 1.0
    assert abs(u.mean() - 0.5) < 0.005 and abs(u.var() - 1 / 12) < 0.002


def test_random_phase_range_and_reproducibility():
    a = random_phase_initial(MESH, 0.3, 0.5, seed=7)
    b = random_phase_initial(MESH, 0.3, 0.5, seed=7)
    c = random_phase_initial(MESH, 0.3, 0.5, seed=8)
    assert np.array_equal(a.values, b.values) and not np.array_equal(a.values, c.values)
    assert a.values.min() >= -0.2 and a.values.max() < 0.8
    nc = random_phase_initial(MESH, 0.3, 0.5, seed=7, centered=False)
    assert nc.values.min() >= 0.3 and nc.values.max() < 0.8


def test_zero_amplitude_is_constant():
    assert np.all(random_phase_initial(MESH, 0.7, 0.0, seed=3).values == 0.7)
    with pytest.raises(ValueError):
        random_phase_initial(MESH, 0.7, -0.1, seed=3)


@pytest.mark.parametrize("layout", [two_circles, four_circles])
def test_circle_indicator_symmetry(layout):
    centers, r = layout()
    phi = circles_initial(MESH, centers, r).values
    assert set(np.unique(phi)) == {0.0, 1.0}
    xy = MESH.vertices
    key = {tuple(np.round(p, 12)): i for i, p in enumerate(xy)}
    mirror = np.array([key[(round(1 - x, 12), round(y, 12))] for x, y in xy])
    assert np.array_equal(phi, phi[mirror])


def test_projected_circles_keep_area():
    centers, r = two_circles()
    fine = build_uniform_mesh(64, 64)
    phi = circles_initial(fine, centers, r, project=True)
    from chvisco import diagnostics as diag
    assert abs(diag.mass(fine, phi) - 2 * np.pi * r * r) < 2e-3


def test_circle_validation():
    with pytest.raises(ValueError, match="overlap"):
        check_circles([(0.4, 0.5), (0.6, 0.5)], 0.15)
    with pytest.raises(ValueError):
        check_circles([(0.05, 0.5)], 0.1)
    assert not circles_initial(MESH, [(0.5, 0.5)], 0.0).values.any()


def test_sheared_deformation():
    phi = circles_initial(MESH, *two_circles())
    F = sheared_F(phi, 0.5).values.reshape(-1, 4)
    assert np.array_equal(F[:, 1], 0.5 * phi.values)
    assert np.all(F[:, 0] == 1) and np.all(F[:, 2] == 0) and np.all(F[:, 3] == 1)
