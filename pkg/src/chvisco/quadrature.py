"""Symmetric Gauss rules on the reference triangle (Dunavant 1985)."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations

import numpy as np


@dataclass(frozen=True)
class QuadratureRule:
    degree: int
    points: np.ndarray  # (q, 3) barycentric coordinates
    weights: np.ndarray  # (q,), summing to the reference area 1/2

    @property
    def xy(self) -> np.ndarray:
        """Points in reference coordinates (x, y) = (l1, l2)."""
        return self.points[:, 1:]


def _orbit(a: float, b: float, c: float) -> list[tuple[float, float, float]]:
    seen = []
    for p in permutations((a, b, c)):
        if not any(np.allclose(p, s, rtol=0, atol=1e-15) for s in seen):
            seen.append(p)
    return seen


def _rule(degree: int, orbits: list[tuple[float, float]]) -> QuadratureRule:
    pts, wts = [], []
    for a, w in orbits:
        for p in _orbit(a, a, 1.0 - 2.0 * a):
            pts.append(p)
            wts.append(0.5 * w)
    return QuadratureRule(degree, np.array(pts), np.array(wts))


_S15 = np.sqrt(15.0)
_ORBITS = {
    1: [(1 / 3, 1.0)],
    2: [(1 / 6, 1 / 3)],
    3: [(1 / 3, -27 / 48), (0.2, 25 / 48)],
    4: [
        (0.445948490915964886318329253883, 0.223381589678011465944630357842),
        (0.091576213509770743459571463402, 0.109951743655321867388702975491),
    ],
    5: [
        (1 / 3, 9 / 40),
        ((6 - _S15) / 21, (155 - _S15) / 1200),
        ((6 + _S15) / 21, (155 + _S15) / 1200),
    ],
}
_CACHE: dict[int, QuadratureRule] = {}


def quadrature_rule(degree: int) -> QuadratureRule:
    if degree not in _ORBITS:
        raise ValueError(f"no quadrature rule of degree {degree}; supported: 1..5")
    if degree not in _CACHE:
        _CACHE[degree] = _rule(degree, _ORBITS[degree])
    return _CACHE[degree]
