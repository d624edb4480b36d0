"""Initial data: seeded random phase fields, circular inclusions, deformation gradients.

Random numbers come from SplitMix64 (Steele, Lea and Flood's 64-bit mixer,
as popularized by Vigna): with state ``s0 = seed`` the i-th output is

    s_i = s0 + i * 0x9E3779B97F4A7C15            (mod 2**64)
    z = (s_i ^ (s_i >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    out_i = z ^ (z >> 31)

for i = 1, 2, ..., and a uniform double on [0, 1) is ``(out_i >> 11) * 2**-53``.
Vertex k receives the k-th draw, so a field is reproducible bit for bit from
the seed alone, in any language.
"""

from __future__ import annotations

import itertools

import numpy as np

from .assembly import Field, project_L2
from .mesh import DofMap, Mesh, SpaceKind, build_dof_map

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def splitmix64(seed: int, n: int) -> np.ndarray:
    """The first ``n`` SplitMix64 outputs for ``seed`` as uint64."""
    if n < 0:
        raise ValueError("n must be non-negative")
    s = np.uint64(int(seed) % 2**64) + np.arange(1, n + 1, dtype=np.uint64) * _GOLDEN
    z = (s ^ (s >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def uniform01(seed: int, n: int) -> np.ndarray:
    """``n`` doubles in [0, 1) from the top 53 bits of each SplitMix64 output."""
    return (splitmix64(seed, n) >> np.uint64(11)).astype(np.float64) * 2.0**-53


def _scalar_space(target) -> DofMap:
    if isinstance(target, Mesh):
        return build_dof_map(target, SpaceKind.P1_SCALAR)
    if target.space_kind is not SpaceKind.P1_SCALAR:
        raise ValueError("initial phase fields live in the P1 scalar space")
    return target


def random_phase_initial(target, mean: float, amplitude: float, seed: int,
                         centered: bool = True) -> Field:
    """``mean + amplitude * (2 iota - 1)`` per vertex, or ``mean + amplitude * iota`` if not centered."""
    if amplitude < 0:
        raise ValueError("amplitude must be non-negative")
    space = _scalar_space(target)
    iota = uniform01(seed, space.num_dofs)
    values = mean + amplitude * (2.0 * iota - 1.0 if centered else iota)
    return Field(space, values)


def check_circles(centers, radius: float) -> np.ndarray:
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    if radius < 0:
        raise ValueError("radius must be non-negative")
    if centers.shape[1] != 2:
        raise ValueError("centers must be 2D points")
    if radius > 0:
        if np.any(centers - radius < 0.0) or np.any(centers + radius > 1.0):
            raise ValueError("circles must lie inside the unit square")
        for i, j in itertools.combinations(range(len(centers)), 2):
            if np.linalg.norm(centers[i] - centers[j]) < 2.0 * radius:
                raise ValueError(f"circles {i} and {j} overlap")
    return centers


def circles_initial(target, centers, radius: float, project: bool = False) -> Field:
    """Indicator of a union of disjoint open discs: 1 at vertices inside, 0 elsewhere.

    With ``project`` the indicator function itself is L2-projected instead.
    """
    space = _scalar_space(target)
    centers = check_circles(centers, radius)

    def inside(x, y):
        d2 = (x[..., None] - centers[:, 0]) ** 2 + (y[..., None] - centers[:, 1]) ** 2
        return np.any(d2 < radius * radius, axis=-1).astype(float)

    if project:
        return project_L2(lambda x, y: inside(x, y), space)
    xy = space.mesh.vertices
    return Field(space, inside(xy[:, 0], xy[:, 1]))


def two_circles(radius: float = 0.15):
    return [(0.3, 0.5), (0.7, 0.5)], radius


def four_circles(radius: float = 0.15):
    return [(0.3, 0.3), (0.7, 0.3), (0.3, 0.7), (0.7, 0.7)], radius


def identity_F(mesh: Mesh) -> Field:
    space = build_dof_map(mesh, SpaceKind.P1_TENSOR2x2)
    return Field(space, np.tile([1.0, 0.0, 0.0, 1.0], mesh.num_vertices))


def sheared_F(phi: Field, a: float) -> Field:
    """Vertexwise ``[[1, a phi], [0, 1]]``."""
    mesh = phi.dof_map.mesh
    vals = np.tile([1.0, 0.0, 0.0, 1.0], (mesh.num_vertices, 1))
    vals[:, 1] = a * phi.values
    return Field(build_dof_map(mesh, SpaceKind.P1_TENSOR2x2), vals.ravel())


def constant_phase(target, value: float) -> Field:
    space = _scalar_space(target)
    return Field(space, np.full(space.num_dofs, float(value)))
