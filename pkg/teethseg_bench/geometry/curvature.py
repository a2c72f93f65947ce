"""Discrete curvature on triangle meshes with mixed Voronoi areas."""

from __future__ import annotations

import logging
import math

import numpy as np
from scipy.sparse.csgraph import dijkstra

from .. import diagnostics as diag
from ..diagnostics import Diagnostics
from ..mesh_types import TriMesh
from .laplacian import corner_angles, corner_cotangents
from .topology import boundary_half_edges, mesh_edges, vertex_adjacency

logger = logging.getLogger(__name__)

_DEFECT_SNAP = 1e-12


def mixed_areas(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Per-vertex mixed Voronoi area.

    Non-obtuse faces contribute Voronoi areas; obtuse faces give half their
    area to the obtuse corner and a quarter to each of the others.
    """
    v = np.asarray(vertices, dtype=np.float64)
    f = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    area = np.zeros(len(v))
    if len(f) == 0:
        return area
    p = v[f]
    face_area = 0.5 * np.linalg.norm(np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1)
    angles = corner_angles(v, f)
    cot = corner_cotangents(v, f)
    to_next = np.roll(p, -1, axis=1) - p
    to_prev = np.roll(p, 1, axis=1) - p
    # corner c: edge to next is opposite corner c+2, edge to prev is opposite corner c+1
    voronoi = (
        np.sum(to_prev**2, axis=2) * np.roll(cot, -1, axis=1) + np.sum(to_next**2, axis=2) * np.roll(cot, -2, axis=1)
    ) / 8.0
    obtuse = angles > math.pi / 2
    face_obtuse = obtuse.any(axis=1)
    contribution = np.where(
        face_obtuse[:, None],
        np.where(obtuse, face_area[:, None] / 2.0, face_area[:, None] / 4.0),
        voronoi,
    )
    np.add.at(area, f.reshape(-1), contribution.reshape(-1))
    return area


def boundary_vertices(mesh: TriMesh) -> np.ndarray:
    mask = np.zeros(mesh.vertex_count, dtype=bool)
    mask[boundary_half_edges(mesh.faces).reshape(-1)] = True
    return mask


def curvatures(mesh: TriMesh) -> tuple[np.ndarray, np.ndarray, np.ndarray, Diagnostics]:
    """Mean curvature magnitude ``H``, Gaussian curvature ``K`` and mixed areas, per vertex.

    Values at zero-area vertices are 0 and reported.
    """
    v = mesh.vertices
    f = mesh.faces
    n = mesh.vertex_count
    area = mixed_areas(v, f)
    laplace = np.zeros((n, 3))
    defect = np.full(n, 2.0 * math.pi)
    if len(f):
        cot = corner_cotangents(v, f)
        angles = corner_angles(v, f)
        np.add.at(defect, f.reshape(-1), -angles.reshape(-1))
        for c in range(3):
            i = f[:, c]
            j = f[:, (c + 1) % 3]
            w = cot[:, (c + 2) % 3][:, None]
            d = v[i] - v[j]
            np.add.at(laplace, i, w * d)
            np.add.at(laplace, j, -w * d)
    defect[np.abs(defect) < _DEFECT_SNAP] = 0.0

    found: list[diag.Diagnostic] = []
    referenced = np.zeros(n, dtype=bool)
    referenced[f.reshape(-1)] = True
    zero = referenced & (area <= 0.0)
    mean = np.zeros(n)
    gauss = np.zeros(n)
    ok = area > 0.0
    mean[ok] = np.linalg.norm(laplace[ok], axis=1) / (4.0 * area[ok])
    gauss[ok] = defect[ok] / area[ok]
    for index in np.flatnonzero(zero):
        found.append(diag.warning("zero-area-vertex", "vertex neighborhood has zero area", int(index)))
    return mean, gauss, area, Diagnostics.of(found)


def max_curvature(mesh: TriMesh) -> tuple[np.ndarray, Diagnostics]:
    """Per-vertex maximum absolute principal curvature ``|H| + sqrt(max(0, H^2 - K))`` in 1/mm.

    Boundary vertices copy the value of the interior vertex nearest along mesh edges.
    """
    mean, gauss, _, found = curvatures(mesh)
    kmax = np.abs(mean) + np.sqrt(np.maximum(0.0, mean**2 - gauss))
    on_boundary = boundary_vertices(mesh)
    referenced = np.zeros(mesh.vertex_count, dtype=bool)
    referenced[mesh.faces.reshape(-1)] = True
    interior = np.flatnonzero(referenced & ~on_boundary)
    boundary = np.flatnonzero(on_boundary)
    if boundary.size:
        if interior.size:
            edges = mesh_edges(mesh.faces)
            lengths = np.linalg.norm(mesh.vertices[edges[:, 0]] - mesh.vertices[edges[:, 1]], axis=1)
            # csgraph drops zero weights
            graph = vertex_adjacency(mesh.vertex_count, edges, np.maximum(lengths, np.finfo(np.float64).tiny))
            _, _, sources = dijkstra(graph, directed=False, indices=interior, return_predecessors=True, min_only=True)
            reached = sources[boundary] >= 0
            kmax[boundary[reached]] = kmax[sources[boundary[reached]]]
            kmax[boundary[~reached]] = 0.0
        else:
            kmax[boundary] = 0.0
            found = found.merge(
                Diagnostics.of([diag.warning("no-interior-vertex", "mesh has no interior vertex, curvature set to 0")])
            )
    kmax[~referenced] = 0.0
    logger.debug("max_curvature vertices=%d boundary=%d", mesh.vertex_count, boundary.size)
    return kmax, found
