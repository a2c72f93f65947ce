"""Edge and adjacency structure of triangle meshes.

All edge-indexed arrays in the package use the edge order returned by
:func:`mesh_edges`: unique undirected pairs ``(i, j)`` with ``i < j``,
sorted lexicographically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components


def _half_edges(faces: np.ndarray) -> np.ndarray:
    faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    # corner c owns the half-edge f[c] -> f[c+1]
    return np.stack([faces, np.roll(faces, -1, axis=1)], axis=2).reshape(-1, 2)


@dataclass(frozen=True)
class EdgeTopology:
    """Undirected edges plus the mapping from face corners to edges.

    ``corner_edge[f, c]`` is the edge between ``faces[f, c]`` and
    ``faces[f, (c + 1) % 3]``; ``face_count[e]`` counts incident faces.
    """

    edges: np.ndarray
    corner_edge: np.ndarray
    face_count: np.ndarray

    @property
    def boundary(self) -> np.ndarray:
        return self.face_count == 1


def edge_topology(faces: np.ndarray) -> EdgeTopology:
    faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    half = _half_edges(faces)
    if half.size == 0:
        empty = np.zeros((0, 2), dtype=np.int64)
        return EdgeTopology(empty, np.zeros((0, 3), dtype=np.int64), np.zeros(0, dtype=np.int64))
    undirected = np.sort(half, axis=1)
    edges, inverse, counts = np.unique(undirected, axis=0, return_inverse=True, return_counts=True)
    return EdgeTopology(edges, inverse.reshape(-1, 3), counts)


def mesh_edges(faces: np.ndarray) -> np.ndarray:
    """Unique undirected edges ``(i, j)``, ``i < j``, in lexicographic order."""
    return edge_topology(faces).edges


def boundary_half_edges(faces: np.ndarray) -> np.ndarray:
    """Directed boundary edges in face orientation (edges with exactly one incident face)."""
    faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    topo = edge_topology(faces)
    half = _half_edges(faces)
    return half[topo.boundary[topo.corner_edge.reshape(-1)]]


def face_adjacency(faces: np.ndarray) -> sparse.csr_matrix:
    """Symmetric face-to-face adjacency through shared edges."""
    faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    m = len(faces)
    topo = edge_topology(faces)
    edge_ids = topo.corner_edge.reshape(-1)
    face_ids = np.repeat(np.arange(m), 3)
    incidence = sparse.csr_matrix(
        (np.ones(len(edge_ids), dtype=np.int64), (face_ids, edge_ids)), shape=(m, len(topo.edges))
    )
    adjacency = (incidence @ incidence.T).tocsr()
    adjacency.setdiag(0)
    adjacency.eliminate_zeros()
    adjacency.data[:] = 1
    return adjacency


def face_neighbors(faces: np.ndarray) -> list[np.ndarray]:
    """Sorted neighbor face indices of every face."""
    adjacency = face_adjacency(faces)
    adjacency.sort_indices()
    return [adjacency.indices[adjacency.indptr[i] : adjacency.indptr[i + 1]] for i in range(adjacency.shape[0])]


def vertex_adjacency(n_vertices: int, edges: np.ndarray, weights: np.ndarray | None = None) -> sparse.csr_matrix:
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    w = np.ones(len(edges)) if weights is None else np.asarray(weights, dtype=np.float64)
    rows = np.concatenate([edges[:, 0], edges[:, 1]])
    cols = np.concatenate([edges[:, 1], edges[:, 0]])
    return sparse.csr_matrix((np.concatenate([w, w]), (rows, cols)), shape=(n_vertices, n_vertices))


def face_components(faces: np.ndarray) -> tuple[int, np.ndarray]:
    """Connected components of faces under edge adjacency."""
    adjacency = face_adjacency(faces)
    if adjacency.shape[0] == 0:
        return 0, np.zeros(0, dtype=np.int64)
    count, labels = connected_components(adjacency, directed=False)
    return int(count), labels.astype(np.int64)


def euler_characteristic(n_vertices: int, faces: np.ndarray) -> int:
    """V - E + F."""
    faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    return int(n_vertices - len(mesh_edges(faces)) + len(faces))
