"""Random samples and finite-difference derivatives shared by the energy tests."""

import numpy as np

from chvisco.energy import EnergyModel, ModelKind

MODELS = {
    "shape_memory": EnergyModel(),
    "mooney_rivlin": EnergyModel(kind=ModelKind.MOONEY_RIVLIN),
    "ogden": EnergyModel(kind=ModelKind.OGDEN),
}
FD_STEP = 1e-6


def samples(n, seed, spread=0.5, min_det=0.2):
    """phi in [-1, 2] and F near I with det F >= min_det (away from the Ogden singularity)."""
    rng = np.random.default_rng(seed)
    phi = rng.uniform(-1.0, 2.0, n)
    F = np.empty((n, 2, 2))
    k = 0
    while k < n:
        G = np.eye(2) + spread * rng.standard_normal((2, 2))
        if np.linalg.det(G) >= min_det:
            F[k] = G
            k += 1
    return phi, F


def fd_dF(fun, phi, F, h=FD_STEP):
    out = np.empty_like(F)
    for i in range(2):
        for j in range(2):
            E = np.zeros((2, 2))
            E[i, j] = h
            out[..., i, j] = (fun(phi, F + E) - fun(phi, F - E)) / (2 * h)
    return out


def fd_dphi(fun, phi, *args, h=FD_STEP):
    return (fun(phi + h, *args) - fun(phi - h, *args)) / (2 * h)


def rel_err(fd, exact):
    """Per-sample error relative to 1 + |exact| (Frobenius over trailing tensor axes)."""
    fd, exact = np.asarray(fd), np.asarray(exact)
    axes = tuple(range(1, fd.ndim))
    num = np.sqrt(np.sum((fd - exact) ** 2, axis=axes)) if axes else np.abs(fd - exact)
    den = np.sqrt(np.sum(exact**2, axis=axes)) if axes else np.abs(exact)
    return num / (1.0 + den)
