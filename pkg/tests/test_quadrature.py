from math import factorial

import numpy as np
import pytest

from chvisco.quadrature import quadrature_rule


def monomial_integral(i, j):
    return factorial(i) * factorial(j) / factorial(i + j + 2)


@pytest.mark.parametrize("degree", [1, 2, 3, 4, 5])
def test_exact_for_declared_degree(degree):
    q = quadrature_rule(degree)
    assert abs(q.weights.sum() - 0.5) < 1e-14
    assert np.allclose(q.points.sum(axis=1), 1.0)
    x, y = q.xy[:, 0], q.xy[:, 1]
    for i in range(degree + 1):
        for j in range(degree + 1 - i):
            exact = monomial_integral(i, j)
            assert abs(np.dot(q.weights, x**i * y**j) - exact) <= 1e-12 * exact


def test_point_counts():
    assert [len(quadrature_rule(d).weights) for d in (1, 2, 5)] == [1, 3, 7]
    assert np.allclose(quadrature_rule(1).weights, [0.5])
    assert np.allclose(quadrature_rule(2).weights, 1 / 6)


def test_degree5_value():
    q = quadrature_rule(5)
    assert abs(np.dot(q.weights, q.xy[:, 0] ** 2 * q.xy[:, 1] ** 3) - 1 / 420) < 1e-12


@pytest.mark.parametrize("degree", [0, 6, 7])
def test_unsupported_degree(degree):
    with pytest.raises(ValueError):
        quadrature_rule(degree)
