"""Mesh topology, Laplacians, curvature and the sparse linear solver."""

from .curvature import curvatures, max_curvature, mixed_areas
from .laplacian import corner_angles, corner_cotangents, cotangent_edge_weights, graph_laplacian, uniform_edge_weights
from .solvers import SolveResult, conjugate_gradient, solve_columns
from .topology import (
    EdgeTopology,
    boundary_half_edges,
    edge_topology,
    euler_characteristic,
    face_adjacency,
    face_components,
    face_neighbors,
    mesh_edges,
    vertex_adjacency,
)

__all__ = [
    "EdgeTopology",
    "SolveResult",
    "boundary_half_edges",
    "conjugate_gradient",
    "corner_angles",
    "corner_cotangents",
    "cotangent_edge_weights",
    "curvatures",
    "edge_topology",
    "euler_characteristic",
    "face_adjacency",
    "face_components",
    "face_neighbors",
    "graph_laplacian",
    "max_curvature",
    "mesh_edges",
    "mixed_areas",
    "solve_columns",
    "uniform_edge_weights",
    "vertex_adjacency",
]
