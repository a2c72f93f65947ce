"""Per-face label fields: vote fusion, island removal and morphological closing.

A label field holds one integer per face; -1 marks an unassigned face and
0 is gingiva.
"""

from __future__ import annotations

import logging
from collections.abc import Iterable, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from ..errors import NoAnchorError
from ..geometry.topology import face_adjacency, face_neighbors
from ..mesh_types import TriMesh

logger = logging.getLogger(__name__)

UNASSIGNED = -1


def majority_vote_fusion(face_hits: Sequence[Iterable[tuple[int, float]]]) -> np.ndarray:
    """Per face, the label with the greatest total weight (smaller label on ties); -1 without hits."""
    out = np.full(len(face_hits), UNASSIGNED, dtype=np.int64)
    for face, hits in enumerate(face_hits):
        totals: dict[int, float] = {}
        for label, weight in hits:
            if weight < 0:
                raise ValueError(f"negative vote weight {weight} on face {face}")
            totals[int(label)] = totals.get(int(label), 0.0) + float(weight)
        if totals:
            out[face] = min(totals, key=lambda lab: (-totals[lab], lab))
    return out


def _fill_from_anchors(neighbors: list[np.ndarray], labels: np.ndarray) -> np.ndarray:
    """Breadth-first propagation from labeled faces; ties at equal hop distance take the smaller label."""
    out = labels.copy()
    frontier = np.flatnonzero(out != UNASSIGNED).tolist()
    while frontier:
        claims: dict[int, int] = {}
        for face in frontier:
            label = int(out[face])
            for nb in neighbors[face].tolist():
                if out[nb] == UNASSIGNED and (nb not in claims or label < claims[nb]):
                    claims[nb] = label
        for nb, label in claims.items():
            out[nb] = label
        frontier = sorted(claims)
    return out


def _check_field(mesh: TriMesh, labels: np.ndarray) -> np.ndarray:
    field = np.asarray(labels, dtype=np.int64).reshape(-1)
    if len(field) != mesh.face_count:
        raise ValueError(f"label field has {len(field)} entries, mesh has {mesh.face_count} faces")
    return field


def _label_components(adjacency: sparse.csr_matrix, labels: np.ndarray) -> tuple[int, np.ndarray]:
    coo = adjacency.tocoo()
    same = labels[coo.row] == labels[coo.col]
    graph = sparse.csr_matrix((np.ones(int(same.sum())), (coo.row[same], coo.col[same])), shape=adjacency.shape)
    count, component = connected_components(graph, directed=False)
    return int(count), component


def island_removal(mesh: TriMesh, labels: np.ndarray, min_island_faces: int = 0) -> np.ndarray:
    """Give every unassigned face the label of its hop-nearest labeled face.

    Labeled components (same label, edge-connected) with fewer than
    ``min_island_faces`` faces are dissolved and refilled the same way.
    """
    field = _check_field(mesh, labels)
    if field.size == 0:
        return field.copy()
    if np.all(field == UNASSIGNED):
        raise NoAnchorError("label field has no assigned face")
    neighbors = face_neighbors(mesh.faces)
    out = _fill_from_anchors(neighbors, field)
    if np.any(out == UNASSIGNED):
        orphan = int(np.flatnonzero(out == UNASSIGNED)[0])
        raise NoAnchorError(f"face {orphan} lies in a component without any labeled face")

    if min_island_faces > 0:
        count, component = _label_components(face_adjacency(mesh.faces), out)
        sizes = np.bincount(component, minlength=count)
        small = sizes[component] < min_island_faces
        if small.any() and not small.all():
            dissolved = out.copy()
            dissolved[small] = UNASSIGNED
            refilled = _fill_from_anchors(neighbors, dissolved)
            # islands cut off from every large component keep their label
            stranded = refilled == UNASSIGNED
            refilled[stranded] = out[stranded]
            logger.debug("island_removal dissolved_faces=%d", int(small.sum()))
            out = refilled
    logger.debug("island_removal filled=%d", int(np.sum(field == UNASSIGNED)))
    return out


def label_closing(mesh: TriMesh, labels: np.ndarray, iterations: int = 1) -> np.ndarray:
    """Morphological closing of each nonzero label, processed in ascending order.

    Dilation grows only into gingiva faces; erosion only takes back faces the
    dilation added, so no other label is ever overwritten.
    """
    field = _check_field(mesh, labels)
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    if np.any(field == UNASSIGNED):
        raise ValueError("label_closing needs a fully labeled field (run island_removal first)")
    out = field.copy()
    if iterations == 0 or field.size == 0:
        return out
    adjacency = face_adjacency(mesh.faces)
    for label in sorted(int(v) for v in np.unique(field) if v != 0):
        region = out == label
        grown = region.copy()
        for _ in range(iterations):
            touching = (adjacency @ grown.astype(np.int64)) > 0
            grown |= touching & (out == 0)
        added = grown & ~region
        if not added.any():
            continue
        for _ in range(iterations):
            outside = (adjacency @ (~grown).astype(np.int64)) > 0
            grown &= ~(added & outside)
            added &= grown
        out[added] = label
    return out
