"""Constitutive functions: double-well potential, elastic energy densities, mobility.

All functions are vectorized: ``phi`` has shape ``S`` and ``F`` shape ``S + (2, 2)``.
Tensor derivatives are returned with the same trailing ``(2, 2)`` layout and
Hessians with ``(2, 2, 2, 2)`` (indices ``ij`` of the output, ``ab`` of the input).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class DomainError(ValueError):
    pass


class SplitError(ValueError):
    pass


class ModelKind(enum.Enum):
    SHAPE_MEMORY = "shape_memory"
    MOONEY_RIVLIN = "mooney_rivlin"
    OGDEN = "ogden"


def smoothstep(t):
    """C1 cubic step: 0 for t <= 0, 1 for t >= 1."""
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def smoothstep_prime(t):
    inside = (t > 0.0) & (t < 1.0)
    return np.where(inside, 6.0 * t * (1.0 - t), 0.0)


@dataclass(frozen=True)
class PhaseCoefficient:
    """``lo`` in the phase phi <= 0, ``hi`` in phi >= 1, smooth C1 blend between."""

    lo: float
    hi: float

    def __call__(self, phi):
        return self.lo + (self.hi - self.lo) * smoothstep(phi)

    def prime(self, phi):
        return (self.hi - self.lo) * smoothstep_prime(phi)


def _frob2(A):
    return A[..., 0, 0] ** 2 + A[..., 0, 1] ** 2 + A[..., 1, 0] ** 2 + A[..., 1, 1] ** 2


# batched 2x2 products written out per component; matmul/einsum/sum over the
# trailing 2x2 axes are several times slower on many tiny matrices
def _mm(A, B):
    A, B = np.broadcast_arrays(np.asarray(A, dtype=float), np.asarray(B, dtype=float))
    out = np.empty(A.shape)
    for i in range(2):
        for j in range(2):
            out[..., i, j] = A[..., i, 0] * B[..., 0, j] + A[..., i, 1] * B[..., 1, j]
    return out


def _cauchy_green(F):
    F = np.asarray(F, dtype=float)
    a, b, c, d = F[..., 0, 0], F[..., 0, 1], F[..., 1, 0], F[..., 1, 1]
    C = np.empty(F.shape)
    C[..., 0, 0] = a * a + c * c
    C[..., 0, 1] = C[..., 1, 0] = a * b + c * d
    C[..., 1, 1] = b * b + d * d
    return C


def target_metric(phi, a: float):
    """H(phi) = Ft^T Ft with Ft = [[1, a phi], [0, 1]]."""
    phi = np.asarray(phi, dtype=float)
    H = np.empty(phi.shape + (2, 2))
    H[..., 0, 0] = 1.0
    H[..., 0, 1] = H[..., 1, 0] = a * phi
    H[..., 1, 1] = 1.0 + (a * phi) ** 2
    return H


def sheared_identity(phi, a: float):
    """The stress-free deformation Ft(phi) = [[1, a phi], [0, 1]]."""
    phi = np.asarray(phi, dtype=float)
    F = np.zeros(phi.shape + (2, 2))
    F[..., 0, 0] = F[..., 1, 1] = 1.0
    F[..., 0, 1] = a * phi
    return F


def _metric_prime(phi, a: float):
    phi = np.asarray(phi, dtype=float)
    Hp = np.zeros(phi.shape + (2, 2))
    Hp[..., 0, 1] = Hp[..., 1, 0] = a
    Hp[..., 1, 1] = 2.0 * a * a * phi
    return Hp


def _sym2_power(C, q: float, need_matrix: bool = True):
    """Eigenvalues e1 >= e2 of symmetric 2x2 C and, optionally, C**q in closed form."""
    tr = C[..., 0, 0] + C[..., 1, 1]
    disc = np.sqrt(0.25 * (C[..., 0, 0] - C[..., 1, 1]) ** 2 + C[..., 0, 1] * C[..., 1, 0])
    e1 = 0.5 * tr + disc
    e2 = 0.5 * tr - disc
    # roundoff can push a zero eigenvalue of F^T F slightly negative
    if np.any(e2 < -1e-12 * np.maximum(1.0, np.abs(e1))):
        raise DomainError("F^T F has a negative eigenvalue")
    e2 = np.maximum(e2, 0.0)
    if not need_matrix:
        return e1, e2, None
    if np.any(e2 <= 0.0) and q < 1.0:
        raise DomainError("singular F: stretch power derivative is unbounded")
    with np.errstate(divide="ignore", invalid="ignore"):
        Lg = np.log(e1) - np.log(e2)
        ratio = np.where(Lg > 1e-300, np.expm1(q * Lg) / np.expm1(Lg), q)
        # C^q = b C + c I with b the divided difference of x^q at (e1, e2)
        b = np.where(e2 > 0, e2 ** (q - 1.0) * ratio, e1 ** (q - 1.0))
    c = e1**q - b * e1
    Cq = b[..., None, None] * C + c[..., None, None] * np.eye(2)
    return e1, e2, Cq


@dataclass(frozen=True)
class EnergyModel:
    """Free-energy model: double well psi, elastic density w, mobility b.

    ``w`` is the shape-memory density ``zeta/2 |F^T F - H(phi)|^2`` by default;
    Mooney-Rivlin and Ogden use phase-dependent coefficients written for the
    2D reference state (w(phi, I) = 0).
    """

    kind: ModelKind = ModelKind.SHAPE_MEMORY
    beta: float = 0.1
    alpha: float = 0.002
    zeta: float = 10.0
    a: float = 0.5
    b0: float = 1.0
    b1: float = 1.0
    k: float | None = None  # None: 1.0, raised above the elastic lower bound if needed
    mr_f1: PhaseCoefficient = PhaseCoefficient(1.0, 2.0)
    mr_f2: PhaseCoefficient = PhaseCoefficient(0.5, 1.0)
    # Ogden terms as (exponent p, coefficient in phase 0, coefficient in phase 1)
    ogden_terms: tuple = ((1.5, 1.0, 2.0), (5.0, 0.1, 0.2))

    def __post_init__(self):
        if isinstance(self.kind, str):
            object.__setattr__(self, "kind", ModelKind(self.kind))
        for name in ("beta", "alpha"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.zeta < 0 or self.a < 0:
            raise ValueError("zeta and a must be non-negative")
        if not 0 < self.b0 <= self.b1:
            raise ValueError("mobility bounds need 0 < b0 <= b1")
        # psi >= 0 and w >= -d1 with d1 known in closed form, so j + k > 0 needs k > d1
        if self.k is None:
            object.__setattr__(self, "k", max(1.0, self.elastic_lower_bound() + 1.0))
        if not self.k > self.elastic_lower_bound():
            raise ValueError(f"SAV shift k must exceed {self.elastic_lower_bound()} so that beta > 0")
        for p, lo, hi in self.ogden_terms:
            if not 0 < p < 6:
                raise ValueError("Ogden exponents must lie in (0, 6)")
            if lo < 0 or hi < 0:
                raise ValueError("Ogden coefficients must be non-negative")

    @property
    def eps(self) -> float:
        """Interface-gradient coefficient, always beta * alpha."""
        return self.beta * self.alpha

    @property
    def well_scale(self) -> float:
        return self.beta / (4.0 * self.alpha)

    @property
    def growth_exponent(self) -> float:
        if self.kind is ModelKind.OGDEN:
            return max(p for p, _, _ in self.ogden_terms)
        return 4.0

    def elastic_lower_bound(self) -> float:
        """d1 >= 0 with w >= -d1 everywhere."""
        if self.kind is ModelKind.SHAPE_MEMORY:
            return 0.0
        if self.kind is ModelKind.MOONEY_RIVLIN:
            return max(self.mr_f1.lo, self.mr_f1.hi) + max(self.mr_f2.lo, self.mr_f2.hi)
        return 2.0 * sum(max(lo, hi) for _, lo, hi in self.ogden_terms)

    # ---- double well -----------------------------------------------------

    def psi(self, phi):
        phi = np.asarray(phi, dtype=float)
        return self.well_scale * phi**2 * (1.0 - phi) ** 2

    def psi_prime(self, phi):
        phi = np.asarray(phi, dtype=float)
        return self.well_scale * 2.0 * phi * (1.0 - phi) * (1.0 - 2.0 * phi)

    def psi_second(self, phi):
        phi = np.asarray(phi, dtype=float)
        return self.well_scale * (12.0 * phi**2 - 12.0 * phi + 2.0)

    # convex part c(phi^4 - 2 phi^3 + 1.5 phi^2), concave part -c phi^2 / 2
    def psi_plus(self, phi):
        phi = np.asarray(phi, dtype=float)
        return self.well_scale * (phi**4 - 2.0 * phi**3 + 1.5 * phi**2)

    def psi_minus(self, phi):
        return -0.5 * self.well_scale * np.asarray(phi, dtype=float) ** 2

    def psi_plus_prime(self, phi):
        phi = np.asarray(phi, dtype=float)
        return self.well_scale * (4.0 * phi**3 - 6.0 * phi**2 + 3.0 * phi)

    def psi_plus_second(self, phi):
        phi = np.asarray(phi, dtype=float)
        return self.well_scale * (12.0 * phi**2 - 12.0 * phi + 3.0)

    def psi_minus_prime(self, phi):
        return -self.well_scale * np.asarray(phi, dtype=float)

    def psi_minus_second(self, phi):
        return -self.well_scale * np.ones_like(np.asarray(phi, dtype=float))

    # ---- mobility --------------------------------------------------------

    def mobility(self, phi):
        phi = np.asarray(phi, dtype=float)
        if self.b0 == self.b1:
            return np.full(phi.shape, self.b0)
        return self.b0 + (self.b1 - self.b0) * smoothstep(phi)

    @property
    def constant_mobility(self) -> bool:
        return self.b0 == self.b1

    # ---- elastic density -------------------------------------------------

    def w(self, phi, F):
        phi = np.asarray(phi, dtype=float)
        F = np.asarray(F, dtype=float)
        C = _cauchy_green(F)
        if self.kind is ModelKind.SHAPE_MEMORY:
            return 0.5 * self.zeta * _frob2(C - target_metric(phi, self.a))
        if self.kind is ModelKind.MOONEY_RIVLIN:
            I1 = _frob2(F)
            return 0.5 * self.mr_f1(phi) * (I1 - 2.0) + 0.5 * self.mr_f2(phi) * (I1**2 - _frob2(C) - 2.0)
        e1, e2, _ = _sym2_power(C, 0.0, need_matrix=False)
        out = np.zeros(np.broadcast_shapes(phi.shape, F.shape[:-2]))
        for p, lo, hi in self.ogden_terms:
            f = PhaseCoefficient(lo, hi)
            out = out + f(phi) * (e1 ** (0.5 * p) + e2 ** (0.5 * p) - 2.0)
        return out

    def dw_dF(self, phi, F):
        phi = np.asarray(phi, dtype=float)
        F = np.asarray(F, dtype=float)
        C = _cauchy_green(F)
        if self.kind is ModelKind.SHAPE_MEMORY:
            return 2.0 * self.zeta * _mm(F, C - target_metric(phi, self.a))
        if self.kind is ModelKind.MOONEY_RIVLIN:
            I1 = _frob2(F)
            f1 = self.mr_f1(phi)[..., None, None]
            f2 = self.mr_f2(phi)[..., None, None]
            return f1 * F + 2.0 * f2 * (I1[..., None, None] * F - F @ C)
        out = np.zeros(np.broadcast_shapes(phi.shape, F.shape[:-2]) + (2, 2))
        for p, lo, hi in self.ogden_terms:
            f = PhaseCoefficient(lo, hi)
            _, _, Cq = _sym2_power(C, 0.5 * p - 1.0)
            out = out + (f(phi) * p)[..., None, None] * (F @ Cq)
        return out

    def dw_dphi(self, phi, F):
        phi = np.asarray(phi, dtype=float)
        F = np.asarray(F, dtype=float)
        C = _cauchy_green(F)
        if self.kind is ModelKind.SHAPE_MEMORY:
            H = target_metric(phi, self.a)
            D = C - H
            P = _metric_prime(phi, self.a)
            return -self.zeta * (P[..., 0, 0] * D[..., 0, 0] + P[..., 0, 1] * D[..., 0, 1]
                                 + P[..., 1, 0] * D[..., 1, 0] + P[..., 1, 1] * D[..., 1, 1])
        if self.kind is ModelKind.MOONEY_RIVLIN:
            I1 = _frob2(F)
            return 0.5 * self.mr_f1.prime(phi) * (I1 - 2.0) + 0.5 * self.mr_f2.prime(phi) * (
                I1**2 - _frob2(C) - 2.0
            )
        e1, e2, _ = _sym2_power(C, 0.0, need_matrix=False)
        out = np.zeros(np.broadcast_shapes(phi.shape, F.shape[:-2]))
        for p, lo, hi in self.ogden_terms:
            f = PhaseCoefficient(lo, hi)
            out = out + f.prime(phi) * (e1 ** (0.5 * p) + e2 ** (0.5 * p) - 2.0)
        return out

    # ---- total bulk density j = psi + w -----------------------------------

    def j(self, phi, F):
        return self.psi(phi) + self.w(phi, F)

    def dj_dphi(self, phi, F):
        return self.psi_prime(phi) + self.dw_dphi(phi, F)


def shape_memory_w(phi, F, zeta: float = 10.0, a: float = 0.5):
    return EnergyModel(zeta=zeta, a=a).w(phi, F)


def mooney_rivlin_w(phi, F, f1: PhaseCoefficient, f2: PhaseCoefficient):
    return EnergyModel(kind=ModelKind.MOONEY_RIVLIN, mr_f1=f1, mr_f2=f2).w(phi, F)


def ogden_w(phi, F, terms):
    return EnergyModel(kind=ModelKind.OGDEN, ogden_terms=tuple(terms)).w(phi, F)


# ---- convex-splitting ledger ---------------------------------------------


@dataclass(frozen=True)
class ProductTerm:
    """f(phi) g(F) with f = f0 + f1 phi + f2 phi^2 and g(F) = vec(F)^T Q vec(F), Q PSD.

    Since g is a convex quadratic, g_plus = g and g_minus = 0.
    ``f`` is split into convex ``f_plus`` plus concave ``f - f_plus``.
    """

    name: str
    f_coeffs: tuple
    f_plus_coeffs: tuple
    Q: np.ndarray

    @staticmethod
    def _poly(c, phi):
        return c[0] + c[1] * phi + c[2] * phi**2

    @staticmethod
    def _dpoly(c, phi):
        return c[1] + 2.0 * c[2] * phi

    def f(self, phi):
        return self._poly(self.f_coeffs, np.asarray(phi, dtype=float))

    def f_prime(self, phi):
        return self._dpoly(self.f_coeffs, np.asarray(phi, dtype=float))

    def f_plus_prime(self, phi):
        return self._dpoly(self.f_plus_coeffs, np.asarray(phi, dtype=float))

    def f_minus_prime(self, phi):
        return self.f_prime(phi) - self.f_plus_prime(phi)

    def f_plus_second(self):
        return 2.0 * self.f_plus_coeffs[2]

    def f_minus_second(self):
        return 2.0 * (self.f_coeffs[2] - self.f_plus_coeffs[2])

    def g(self, F):
        v = np.asarray(F, dtype=float).reshape(F.shape[:-2] + (4,))
        return np.einsum("...a,ab,...b->...", v, self.Q, v)

    def g_prime(self, F):
        v = np.asarray(F, dtype=float).reshape(F.shape[:-2] + (4,))
        return (2.0 * v @ self.Q).reshape(F.shape)

    def g_hessian(self):
        return 2.0 * self.Q.reshape(2, 2, 2, 2)


@dataclass(frozen=True)
class SplitLedger:
    """Sum-of-products form of the shape-memory density with its convex splitting.

    ``w = h(F) + sum_i f_i(phi) g_i(F) + m(phi)`` with ``h = zeta/2 |F^T F|^2``,
    ``m = zeta/2 |H(phi)|^2`` (convex, treated together with psi_plus).
    h is split as ``h_plus = h + c0/2 |F|^2`` and ``h_minus = -c0/2 |F|^2``.
    """

    model: EnergyModel
    c0: float
    F_max: float
    terms: tuple = field(default_factory=tuple)

    # h part
    def h(self, F):
        return 0.5 * self.model.zeta * _frob2(_cauchy_green(F))

    def h_prime(self, F):
        return 2.0 * self.model.zeta * _mm(F, _cauchy_green(F))

    def h_hessian(self, F):
        # H[ijab] = d_ia C_bj + F_ib F_aj + B_ia d_jb, one component at a time
        F = np.asarray(F, dtype=float)
        z = self.model.zeta
        C = _cauchy_green(F)
        B = _cauchy_green(np.swapaxes(F, -1, -2))
        Hs = np.empty(F.shape[:-2] + (2, 2, 2, 2))
        for i in range(2):
            for j in range(2):
                for a in range(2):
                    for b in range(2):
                        val = F[..., i, b] * F[..., a, j]
                        if i == a:
                            val = val + C[..., b, j]
                        if j == b:
                            val = val + B[..., i, a]
                        Hs[..., i, j, a, b] = val
        return 2.0 * z * Hs

    def h_plus_prime(self, F):
        return self.h_prime(F) + self.c0 * F

    def h_minus_prime(self, F):
        return -self.c0 * np.asarray(F, dtype=float)

    def h_plus_hessian(self, F):
        return self.h_hessian(F) + self.c0 * np.eye(4).reshape(2, 2, 2, 2)

    # m part
    def m(self, phi):
        s = (self.model.a * np.asarray(phi, dtype=float)) ** 2
        return 0.5 * self.model.zeta * (2.0 + 4.0 * s + s * s)

    def m_prime(self, phi):
        a = self.model.a
        phi = np.asarray(phi, dtype=float)
        return self.model.zeta * (4.0 * a * a * phi + 2.0 * a**4 * phi**3)

    def m_second(self, phi):
        a = self.model.a
        phi = np.asarray(phi, dtype=float)
        return self.model.zeta * (4.0 * a * a + 6.0 * a**4 * phi**2)

    def reconstruct(self, phi, F):
        total = self.h(F) + self.m(phi)
        for t in self.terms:
            total = total + t.f(phi) * t.g(F)
        return total

    # convex/concave parts of the phase potential psi + m
    def phase_plus_prime(self, phi):
        return self.model.psi_plus_prime(phi) + self.m_prime(phi)

    def phase_plus_second(self, phi):
        return self.model.psi_plus_second(phi) + self.m_second(phi)

    def phase_minus_prime(self, phi):
        return self.model.psi_minus_prime(phi)

    def verify(self, samples: int = 1000, seed: int = 0, rtol: float = 1e-12) -> None:
        """Raise SplitError with the offending sample unless every declared property holds."""
        rng = np.random.default_rng(seed)
        phi = rng.uniform(-1.0, 2.0, samples)
        F = rng.normal(size=(samples, 2, 2))
        F *= (self.F_max * rng.uniform(0.0, 1.0, samples) / np.sqrt(_frob2(F)))[:, None, None]
        w = self.model.w(phi, F)
        rec = self.reconstruct(phi, F)
        scale = 1.0 + np.abs(w)
        bad = np.abs(rec - w) > rtol * scale
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise SplitError(f"reconstruction mismatch at phi={phi[i]!r}, F={F[i].tolist()}")

        def check(values, sign, what):
            # tolerance relative to the magnitude of the Hessian being tested
            tol = 1e-10 * (1.0 + np.abs(values).max())
            bad = sign * values < -tol
            if bad.any():
                i = int(np.flatnonzero(bad)[0])
                raise SplitError(f"{what} fails at phi={phi[i]!r}, F={F[i].tolist()}")

        Hh = self.h_plus_hessian(F).reshape(samples, 4, 4)
        check(np.linalg.eigvalsh(0.5 * (Hh + Hh.transpose(0, 2, 1)))[:, 0], 1, "convexity of h_plus")
        check(np.full(samples, -self.c0), -1, "concavity of h_minus")
        check(self.phase_plus_second(phi), 1, "convexity of psi_plus + m")
        check(self.model.psi_minus_second(phi), -1, "concavity of psi_minus")
        for t in self.terms:
            gh = np.linalg.eigvalsh(t.g_hessian().reshape(4, 4))[0]
            check(np.full(samples, gh), 1, f"convexity of g in {t.name}")
            check(np.full(samples, t.f_plus_second()), 1, f"convexity of f_plus in {t.name}")
            check(np.full(samples, t.f_minus_second()), -1, f"concavity of f_minus in {t.name}")
            check(t.g(F), 1, f"non-negativity of g in {t.name}")


def build_split_ledger(model: EnergyModel, F_max: float = 5.0, c0: float | None = None,
                       verify: bool = True) -> SplitLedger:
    """Convex-splitting ledger for the shape-memory density.

    ``-zeta H(phi) : F^T F`` expands into four products: the mixed term
    ``C_12`` is written with the polarization identity in the columns of F so
    every ``g_i`` is a non-negative convex quadratic.
    """
    if model.kind is not ModelKind.SHAPE_MEMORY:
        raise ValueError("a convex-splitting ledger is only defined for the shape-memory density")
    z, a = model.zeta, model.a
    if c0 is None:
        c0 = 6.0 * z * F_max**2
    if c0 < 0:
        raise ValueError("c0 must be non-negative")
    Q11 = np.diag([1.0, 0.0, 1.0, 0.0])  # C11 = |first column|^2
    Q22 = np.diag([0.0, 1.0, 0.0, 1.0])  # C22 = |second column|^2
    blk = np.array([[1.0, 1.0], [1.0, 1.0]])
    Qs = np.kron(np.eye(2), blk)  # |col1 + col2|^2
    Qd = np.kron(np.eye(2), np.array([[1.0, -1.0], [-1.0, 1.0]]))  # |col1 - col2|^2
    terms = (
        # constant and linear f are both convex and concave: keep them whole in f_plus
        ProductTerm("C11", (-z, 0.0, 0.0), (-z, 0.0, 0.0), Q11),
        # -zeta (1 + a^2 phi^2) is concave: f_plus = 0
        ProductTerm("C22", (-z, 0.0, -z * a * a), (0.0, 0.0, 0.0), Q22),
        ProductTerm("C12+", (0.0, -0.5 * z * a, 0.0), (0.0, -0.5 * z * a, 0.0), Qs),
        ProductTerm("C12-", (0.0, 0.5 * z * a, 0.0), (0.0, 0.5 * z * a, 0.0), Qd),
    )
    ledger = SplitLedger(model=model, c0=float(c0), F_max=float(F_max), terms=terms)
    if verify:
        ledger.verify()
    return ledger


# ---- truncation utilities ------------------------------------------------


def step_g(r):
    """Smooth step: 1 for r <= 1, 0 for r >= 2, cubic in between."""
    return 1.0 - smoothstep(np.asarray(r, dtype=float) - 1.0)


def step_g_prime(r):
    return -smoothstep_prime(np.asarray(r, dtype=float) - 1.0)


def truncation_gR(r, R: float, p: float):
    """g_R(r) = g(r/R) + (1 - g(r/R)) r^min(0, 4 - p)."""
    if not R > 1:
        raise ValueError("R must exceed 1")
    if not 0 <= p < 6:
        raise ValueError("growth exponent must lie in [0, 6)")
    r = np.asarray(r, dtype=float)
    s = step_g(r / R)
    e = min(0.0, 4.0 - p)
    if e == 0.0:
        return np.ones_like(r)
    with np.errstate(divide="ignore"):
        tail = np.where(r > 0, np.abs(r) ** e, 1.0)
    return s + (1.0 - s) * tail


def truncation_gR_prime(r, R: float, p: float):
    r = np.asarray(r, dtype=float)
    e = min(0.0, 4.0 - p)
    if e == 0.0:
        return np.zeros_like(r)
    s = step_g(r / R)
    with np.errstate(divide="ignore"):
        tail = np.where(r > 0, r**e, 1.0)
        dtail = np.where(r > 0, e * r ** (e - 1.0), 0.0)
    return step_g_prime(r / R) / R * (1.0 - tail) + (1.0 - s) * dtail


def truncated_w(model: EnergyModel, phi, F, R: float):
    """w_R(phi, F) = g_R(|F|) w(phi, F)."""
    F = np.asarray(F, dtype=float)
    r = np.sqrt(_frob2(F))
    return truncation_gR(r, R, model.growth_exponent) * model.w(phi, F)


def growth_constants(model: EnergyModel, phi_range=(-1.0, 2.0)):
    """``(C, d1, p)`` with ``-d1 <= w <= C (1 + |F|^p)`` for phi in ``phi_range``."""
    p = model.growth_exponent
    d1 = model.elastic_lower_bound()
    if model.kind is ModelKind.SHAPE_MEMORY:
        # |C - H|^2 <= 2|F|^4 + 2|H|^2
        phis = np.linspace(*phi_range, 201)
        h2 = _frob2(target_metric(phis, model.a)).max()
        return model.zeta * max(1.0, h2), d1, p
    if model.kind is ModelKind.MOONEY_RIVLIN:
        # (F:F - 2)/2 <= (1 + |F|^4)/4 and det C - 1 <= |F|^4 / 4
        f1 = max(model.mr_f1.lo, model.mr_f1.hi)
        f2 = max(model.mr_f2.lo, model.mr_f2.hi)
        return f1 + f2, d1, p
    # lambda_i <= |F|, so each term is at most 2 f (1 + |F|^p_max)
    return 2.0 * sum(max(lo, hi) for _, lo, hi in model.ogden_terms), d1, p
