"""Triangulations of the unit square and finite element dof layouts."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

import numpy as np


class MeshError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming triangulation.

    ``edges[e]`` holds the sorted vertex pair of edge ``e``; ``edge_triangles[e]``
    its one or two adjacent triangles (``-1`` on the boundary). Local edge ``k``
    of a triangle is the edge opposite local vertex ``k``.
    """

    vertices: np.ndarray  # (V, 2)
    triangles: np.ndarray  # (T, 3), counterclockwise
    edges: np.ndarray  # (E, 2)
    edge_triangles: np.ndarray  # (E, 2)
    triangle_edges: np.ndarray  # (T, 3)
    boundary_vertex_flags: np.ndarray
    boundary_edge_flags: np.ndarray

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_triangles(self) -> int:
        return len(self.triangles)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    def edge_midpoints(self) -> np.ndarray:
        return self.vertices[self.edges].mean(axis=1)

    def check(self, domain_area: float = 1.0) -> None:
        """Raise MeshError unless every structural invariant holds."""
        areas = self.signed_areas()
        if np.any(areas <= 0.0):
            raise MeshError(f"{np.sum(areas <= 0)} triangles with non-positive area")
        if abs(areas.sum() - domain_area) > 1e-12 * domain_area:
            raise MeshError(f"total area {areas.sum()!r} != {domain_area}")
        shared = np.sum(self.edge_triangles >= 0, axis=1)
        if np.any(shared[self.boundary_edge_flags] != 1) or np.any(
            shared[~self.boundary_edge_flags] != 2
        ):
            raise MeshError("edge/triangle adjacency is not conforming")
        euler = self.num_vertices - self.num_edges + self.num_triangles + 1
        if euler != 2:
            raise MeshError(f"Euler characteristic check failed: V-E+(T+1) = {euler}")


def _edge_topology(triangles: np.ndarray):
    T = len(triangles)
    local = np.array([[1, 2], [2, 0], [0, 1]])
    pairs = np.sort(triangles[:, local].reshape(-1, 2), axis=1)
    edges, inverse = np.unique(pairs, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    triangle_edges = inverse.reshape(T, 3)
    edge_triangles = np.full((len(edges), 2), -1, dtype=np.int64)
    owner = np.repeat(np.arange(T), 3)
    order = np.argsort(inverse, kind="stable")
    sorted_edges = inverse[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = sorted_edges[1:] != sorted_edges[:-1]
    edge_triangles[sorted_edges[first], 0] = owner[order[first]]
    second = ~first
    if np.any(np.bincount(sorted_edges, minlength=len(edges)) > 2):
        raise MeshError("edge shared by more than two triangles")
    edge_triangles[sorted_edges[second], 1] = owner[order[second]]
    return edges, edge_triangles, triangle_edges


def mesh_from_arrays(vertices: np.ndarray, triangles: np.ndarray) -> Mesh:
    vertices = np.asarray(vertices, dtype=float)
    triangles = np.asarray(triangles, dtype=np.int64)
    edges, edge_triangles, triangle_edges = _edge_topology(triangles)
    boundary_edges = edge_triangles[:, 1] < 0
    boundary_vertices = np.zeros(len(vertices), dtype=bool)
    boundary_vertices[edges[boundary_edges].ravel()] = True
    return Mesh(
        vertices=vertices,
        triangles=triangles,
        edges=edges,
        edge_triangles=edge_triangles,
        triangle_edges=triangle_edges,
        boundary_vertex_flags=boundary_vertices,
        boundary_edge_flags=boundary_edges,
    )


def build_uniform_mesh(nx: int, ny: int) -> Mesh:
    """Uniform mesh of [0,1]^2; each cell is cut along its lower-left/upper-right diagonal."""
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise ValueError(f"cell counts must be positive integers, got ({nx}, {ny})")
    nx, ny = int(nx), int(ny)
    x = np.linspace(0.0, 1.0, nx + 1)
    y = np.linspace(0.0, 1.0, ny + 1)
    X, Y = np.meshgrid(x, y, indexing="xy")
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    j, i = np.meshgrid(np.arange(ny), np.arange(nx), indexing="ij")
    ll = (j * (nx + 1) + i).ravel()
    lr = ll + 1
    ul = ll + nx + 1
    ur = ul + 1
    lower = np.column_stack([ll, lr, ur])
    upper = np.column_stack([ll, ur, ul])
    triangles = np.stack([lower, upper], axis=1).reshape(-1, 3)
    return mesh_from_arrays(vertices, triangles)


def refine_local(mesh: Mesh, region: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> Mesh:
    """Red-refine triangles whose centroid lies in ``region``; close hanging nodes.

    ``region(x, y)`` takes coordinate arrays and returns a boolean array.
    Unmarked triangles with two or more split edges are promoted to red
    refinement; those left with exactly one split edge are bisected from its
    midpoint to the opposite vertex.
    """
    c = mesh.centroids()
    red = np.asarray(region(c[:, 0], c[:, 1]), dtype=bool).reshape(-1)
    if red.shape != (mesh.num_triangles,):
        raise ValueError("region predicate must return one flag per point")
    if not red.any():
        return mesh

    te = mesh.triangle_edges
    while True:
        split = np.zeros(mesh.num_edges, dtype=bool)
        split[te[red].ravel()] = True
        nsplit = split[te].sum(axis=1)
        promote = (~red) & (nsplit >= 2)
        if not promote.any():
            break
        red |= promote

    V = mesh.num_vertices
    split_ids = np.flatnonzero(split)
    midpoint_index = np.full(mesh.num_edges, -1, dtype=np.int64)
    midpoint_index[split_ids] = V + np.arange(len(split_ids))
    vertices = np.vstack([mesh.vertices, mesh.edge_midpoints()[split_ids]])

    new = []
    for t, tri in enumerate(mesh.triangles):
        a, b, cc = tri
        # m_k is the midpoint of the edge opposite vertex k
        m = midpoint_index[te[t]]
        if red[t]:
            new += [[a, m[2], m[1]], [m[2], b, m[0]], [m[1], m[0], cc], [m[0], m[1], m[2]]]
        elif (m >= 0).any():
            k = int(np.flatnonzero(m >= 0)[0])
            p, q, r = tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]
            new += [[p, q, m[k]], [p, m[k], r]]
        else:
            new.append([a, b, cc])
    refined = mesh_from_arrays(vertices, np.array(new, dtype=np.int64))
    if np.any(refined.signed_areas() <= 0.0):
        raise MeshError("refinement produced a degenerate triangle")
    return refined


class SpaceKind(enum.Enum):
    P1_SCALAR = "P1"
    P1_TENSOR2x2 = "P1T"
    P2_VECTOR2 = "P2V"
    P1_SCALAR_ZERO_MEAN = "P1Z"


@dataclass(frozen=True, eq=False)
class DofMap:
    """Dof layout of one space on one mesh.

    Vector/tensor components are interleaved: dof ``ncomp * node + c``.
    For P2 the nodes are the vertices followed by the edge midpoints.
    """

    mesh: Mesh
    space_kind: SpaceKind
    num_dofs: int
    element_dof_table: np.ndarray  # (T, nodes_per_element * ncomp)
    boundary_dofs: np.ndarray
    element_nodes: np.ndarray  # (T, nodes_per_element)
    num_components: int

    @property
    def num_nodes(self) -> int:
        return self.num_dofs // self.num_components

    @property
    def degree(self) -> int:
        return 2 if self.space_kind is SpaceKind.P2_VECTOR2 else 1

    @property
    def zero_mean(self) -> bool:
        return self.space_kind is SpaceKind.P1_SCALAR_ZERO_MEAN

    def node_coordinates(self) -> np.ndarray:
        if self.degree == 2:
            return np.vstack([self.mesh.vertices, self.mesh.edge_midpoints()])
        return self.mesh.vertices


def build_dof_map(mesh: Mesh, space_kind: SpaceKind) -> DofMap:
    V = mesh.num_vertices
    if space_kind is SpaceKind.P2_VECTOR2:
        nodes = np.hstack([mesh.triangles, V + mesh.triangle_edges])
        ncomp = 2
        boundary_nodes = np.concatenate(
            [np.flatnonzero(mesh.boundary_vertex_flags), V + np.flatnonzero(mesh.boundary_edge_flags)]
        )
        num_nodes = V + mesh.num_edges
    else:
        nodes = mesh.triangles.copy()
        ncomp = 4 if space_kind is SpaceKind.P1_TENSOR2x2 else 1
        boundary_nodes = np.flatnonzero(mesh.boundary_vertex_flags)
        num_nodes = V
    table = (ncomp * nodes[:, :, None] + np.arange(ncomp)).reshape(len(nodes), -1)
    boundary = np.sort((ncomp * boundary_nodes[:, None] + np.arange(ncomp)).ravel())
    return DofMap(
        mesh=mesh,
        space_kind=space_kind,
        num_dofs=ncomp * num_nodes,
        element_dof_table=table,
        boundary_dofs=boundary,
        element_nodes=nodes,
        num_components=ncomp,
    )
