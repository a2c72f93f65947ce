"""Corner angles, cotangent weights and graph Laplacians."""

from __future__ import annotations

import numpy as np
from scipy import sparse

from .topology import edge_topology


def corner_vectors(vertices: np.ndarray, faces: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """For every corner, the vectors to the next and to the previous corner of its face."""
    v = np.asarray(vertices, dtype=np.float64)
    f = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    p = v[f]
    to_next = np.roll(p, -1, axis=1) - p
    to_prev = np.roll(p, 1, axis=1) - p
    return to_next, to_prev


def corner_angles(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Interior angle at each face corner, shape ``(m, 3)``."""
    a, b = corner_vectors(vertices, faces)
    cross = np.linalg.norm(np.cross(a, b), axis=2)
    dot = np.einsum("fci,fci->fc", a, b)
    return np.arctan2(cross, dot)


def corner_cotangents(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Cotangent of each corner angle; 0 on zero-area faces."""
    a, b = corner_vectors(vertices, faces)
    cross = np.linalg.norm(np.cross(a, b), axis=2)
    dot = np.einsum("fci,fci->fc", a, b)
    out = np.zeros_like(dot)
    np.divide(dot, cross, out=out, where=cross > 0)
    return out


def cotangent_edge_weights(
    vertices: np.ndarray, faces: np.ndarray, clamp: bool = True
) -> tuple[np.ndarray, np.ndarray]:
    """Edges and their weights ``(cot a + cot b) / 2``.

    The corner opposite an edge is the one two steps further round the
    face. With ``clamp`` negative weights are set to 0.
    """
    faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    topo = edge_topology(faces)
    cot = corner_cotangents(vertices, faces)
    opposite = np.roll(cot, -2, axis=1)
    weights = np.zeros(len(topo.edges))
    np.add.at(weights, topo.corner_edge.reshape(-1), 0.5 * opposite.reshape(-1))
    if clamp:
        weights = np.maximum(weights, 0.0)
    return topo.edges, weights


def uniform_edge_weights(faces: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    edges = edge_topology(faces).edges
    return edges, np.ones(len(edges))


def graph_laplacian(n_vertices: int, edges: np.ndarray, weights: np.ndarray) -> sparse.csr_matrix:
    """``L = D - W`` for an undirected weighted graph."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    w = np.asarray(weights, dtype=np.float64)
    rows = np.concatenate([edges[:, 0], edges[:, 1]])
    cols = np.concatenate([edges[:, 1], edges[:, 0]])
    adjacency = sparse.csr_matrix((np.concatenate([w, w]), (rows, cols)), shape=(n_vertices, n_vertices))
    degree = np.asarray(adjacency.sum(axis=1)).reshape(-1)
    return (sparse.diags(degree) - adjacency).tocsr()
