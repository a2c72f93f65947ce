"""Random-walker vertex labeling on mesh graphs with convexity-steered edge weights.

Each label's arrival probability is the solution of a combinatorial
Dirichlet problem: the graph Laplacian restricted to unseeded vertices,
with seeds of that label fixed at 1 and all other seeds at 0.
"""

from __future__ import annotations

import logging
from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import connected_components

from ..errors import UnreachableRegionError
from ..geometry.laplacian import graph_laplacian
from ..geometry.solvers import solve_columns
from ..geometry.topology import edge_topology, mesh_edges, vertex_adjacency
from ..mesh_types import TriMesh

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class WalkerResult:
    """``probabilities[:, k]`` belongs to ``label_values[k]``; labels are ascending."""

    labels: np.ndarray
    probabilities: np.ndarray
    label_values: np.ndarray
    residual: float = 0.0


def random_walker_graph(
    n_vertices: int,
    edges: np.ndarray,
    weights: np.ndarray,
    seeds: Mapping[int, int],
    tolerance: float = 1e-12,
    max_iter_factor: int = 10,
) -> WalkerResult:
    """Random walker on an explicit weighted graph. Ties between labels go to the smaller label."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    weights = np.asarray(weights, dtype=np.float64).reshape(-1)
    if len(weights) != len(edges):
        raise ValueError("one weight per edge is required")
    if np.any(weights < 0) or not np.all(np.isfinite(weights)):
        raise ValueError("edge weights must be finite and >= 0")
    if not seeds:
        raise ValueError("at least one seed is required")
    seed_ids = np.asarray(sorted(seeds), dtype=np.int64)
    if seed_ids.min() < 0 or seed_ids.max() >= n_vertices:
        raise ValueError("seed vertex out of range")
    seed_labels = np.asarray([seeds[int(v)] for v in seed_ids], dtype=np.int64)
    label_values = np.unique(seed_labels)
    column = np.searchsorted(label_values, seed_labels)

    probabilities = np.zeros((n_vertices, len(label_values)))
    probabilities[seed_ids, column] = 1.0
    unseeded = np.setdiff1d(np.arange(n_vertices), seed_ids)
    residual = 0.0
    if unseeded.size:
        positive = weights > 0
        graph = vertex_adjacency(n_vertices, edges[positive], weights[positive])
        _, component = connected_components(graph, directed=False)
        reached = np.zeros(component.max() + 1, dtype=bool)
        reached[component[seed_ids]] = True
        stranded = unseeded[~reached[component[unseeded]]]
        if stranded.size:
            raise UnreachableRegionError(
                f"{stranded.size} unseeded vertices (first {int(stranded[0])}) are not connected to any seed"
            )
        laplacian = graph_laplacian(n_vertices, edges, weights)
        system = laplacian[unseeded][:, unseeded]
        rhs = -(laplacian[unseeded][:, seed_ids] @ probabilities[seed_ids])
        probabilities[unseeded], residual = solve_columns(
            system, rhs, tolerance=tolerance, max_iter=max_iter_factor * n_vertices
        )
    labels = label_values[np.argmax(probabilities, axis=1)]
    logger.debug(
        "random_walker vertices=%d seeds=%d labels=%d residual=%.3e",
        n_vertices,
        seed_ids.size,
        label_values.size,
        residual,
    )
    return WalkerResult(labels, probabilities, label_values, residual)


def convexity_feature(mesh: TriMesh) -> np.ndarray:
    """Per-edge concavity in radians, in :func:`mesh_edges` order.

    An interior edge scores the angle between its two face normals when the
    far vertex of the second face lies above the plane of the first
    (concave fold); convex, flat and boundary edges score 0. Faces must be
    consistently oriented.
    """
    faces = mesh.faces
    topo = edge_topology(faces)
    out = np.zeros(len(topo.edges))
    if len(faces) == 0:
        return out
    corner_edge = topo.corner_edge.reshape(-1)
    order = np.argsort(corner_edge, kind="stable")
    starts = np.searchsorted(corner_edge[order], np.arange(len(topo.edges)))
    interior = np.flatnonzero(topo.face_count == 2)
    first_corner = order[starts[interior]]
    second_corner = order[starts[interior] + 1]
    f1, f2 = first_corner // 3, second_corner // 3
    opposite2 = faces[f2, (second_corner % 3 + 2) % 3]

    normals = mesh.face_normals()
    n1, n2 = normals[f1], normals[f2]
    on_edge = mesh.vertices[topo.edges[interior, 0]]
    height = np.einsum("ij,ij->i", mesh.vertices[opposite2] - on_edge, n1)
    angle = np.arctan2(np.linalg.norm(np.cross(n1, n2), axis=1), np.einsum("ij,ij->i", n1, n2))
    out[interior] = np.where(height > 0, angle, 0.0)
    return out


def random_walker(
    mesh: TriMesh,
    seeds: Mapping[int, int],
    edge_feature: np.ndarray | None = None,
    beta: float = 10.0,
    tolerance: float = 1e-12,
    max_iter_factor: int = 10,
) -> WalkerResult:
    """Random walker on the mesh edge graph with weights ``exp(-beta * edge_feature)``.

    ``edge_feature`` defaults to :func:`convexity_feature`, so walkers rarely
    cross concave creases between teeth and gingiva.
    """
    edges = mesh_edges(mesh.faces)
    feature = convexity_feature(mesh) if edge_feature is None else np.asarray(edge_feature, dtype=np.float64)
    if feature.shape != (len(edges),):
        raise ValueError(f"edge_feature must have {len(edges)} entries (one per mesh edge)")
    if np.any(feature < 0):
        raise ValueError("edge_feature must be >= 0")
    weights = np.exp(-beta * feature)
    return random_walker_graph(mesh.vertex_count, edges, weights, seeds, tolerance, max_iter_factor)
