"""Tooth cropping, harmonic UV flattening and polygon back-projection.

A crop is flattened by pinning its boundary loop to the unit circle at
angles proportional to arc length and solving the discrete Laplace
equation for the interior with clamped cotangent (or uniform) weights.
2D polygons drawn on the chart map back to parent-mesh vertex sets.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import StrEnum
from typing import Any

import numpy as np
import shapely
from shapely.geometry import Polygon
from shapely.validation import explain_validity

from .errors import EmptySelectionError, InvalidPolygonError, NotADiskError
from .geometry.laplacian import cotangent_edge_weights, graph_laplacian, uniform_edge_weights
from .geometry.solvers import solve_columns
from .geometry.topology import boundary_half_edges, edge_topology, euler_characteristic, face_components
from .mesh_types import ToothInstance, TriMesh

logger = logging.getLogger(__name__)


class FlattenWeights(StrEnum):
    COTANGENT = "cotangent"
    UNIFORM = "uniform"


@dataclass(frozen=True, eq=False)
class SubMesh:
    """A connected piece of a parent mesh; ``parent_index_map[i]`` is the parent index of vertex ``i``."""

    mesh: TriMesh
    parent_index_map: np.ndarray

    def __post_init__(self) -> None:
        parent = np.asarray(self.parent_index_map, dtype=np.int64).reshape(-1)
        if len(parent) != self.mesh.vertex_count:
            raise ValueError("parent_index_map length must equal the submesh vertex count")
        object.__setattr__(self, "parent_index_map", parent)

    @classmethod
    def whole(cls, mesh: TriMesh) -> SubMesh:
        return cls(mesh, np.arange(mesh.vertex_count))


@dataclass(frozen=True, eq=False)
class UVChart:
    uv: np.ndarray
    boundary_loop: np.ndarray
    residual: float = 0.0


def crop_sphere(mesh: TriMesh, center: np.ndarray, radius: float) -> SubMesh:
    """Faces with all three vertices inside the sphere, reduced to the largest connected component.

    Component size is counted in faces; ties go to the component holding
    the selected vertex nearest the center.
    """
    if radius <= 0:
        raise ValueError(f"radius must be > 0, got {radius}")
    center = np.asarray(center, dtype=np.float64).reshape(3)
    distance = np.linalg.norm(mesh.vertices - center, axis=1)
    inside = distance <= radius
    faces = mesh.faces[inside[mesh.faces].all(axis=1)] if mesh.face_count else mesh.faces
    if len(faces) == 0:
        raise EmptySelectionError(f"no face lies inside the sphere of radius {radius:g} at {center.tolist()}")

    count, labels = face_components(faces)
    if count > 1:
        sizes = np.bincount(labels, minlength=count)
        best = np.flatnonzero(sizes == sizes.max())
        if len(best) > 1:
            nearest = np.full(count, np.inf)
            np.minimum.at(nearest, np.repeat(labels, 3), distance[faces.reshape(-1)])
            best = best[np.argmin(nearest[best])][None]
        faces = faces[labels == best[0]]

    parent = np.unique(faces.reshape(-1))
    local = np.full(mesh.vertex_count, -1, dtype=np.int64)
    local[parent] = np.arange(len(parent))
    normals = mesh.normals[parent] if mesh.normals is not None else None
    sub = SubMesh(TriMesh(mesh.vertices[parent], local[faces], normals), parent)
    logger.debug(
        "crop_sphere radius=%.4f components=%d vertices=%d faces=%d",
        radius,
        count,
        sub.mesh.vertex_count,
        sub.mesh.face_count,
    )
    return sub


def crop_tooth(mesh: TriMesh, tooth: ToothInstance, radius_factor: float = 1.5) -> SubMesh:
    """Sphere crop around a tooth centroid with radius ``radius_factor * size``."""
    return crop_sphere(mesh, tooth.centroid, radius_factor * tooth.size)


def boundary_loop(sub: SubMesh) -> np.ndarray:
    """The single boundary loop in face orientation, starting at its smallest vertex index.

    Raises :class:`NotADiskError` unless the submesh is manifold along its
    boundary, has exactly one loop and Euler characteristic 1.
    """
    faces = sub.mesh.faces
    topo = edge_topology(faces)
    if np.any(topo.face_count > 2):
        raise NotADiskError("submesh has non-manifold edges")
    half = boundary_half_edges(faces)
    if len(half) == 0:
        raise NotADiskError("submesh has no boundary (closed surface)")
    successor: dict[int, int] = {}
    incoming: set[int] = set()
    for a, b in half.tolist():
        if a in successor or b in incoming:
            raise NotADiskError(f"boundary is pinched at vertex {a if a in successor else b}")
        successor[a] = b
        incoming.add(b)

    start = min(successor)
    loop = [start]
    current = successor[start]
    while current != start:
        if current not in successor:
            raise NotADiskError("boundary is not closed")
        loop.append(current)
        current = successor[current]
    if len(loop) != len(half):
        raise NotADiskError(f"submesh has several boundary loops ({len(half) - len(loop)} boundary edges left over)")
    chi = euler_characteristic(sub.mesh.vertex_count, faces)
    if chi != 1:
        raise NotADiskError(f"Euler characteristic is {chi}, a disk has 1")
    return np.asarray(loop, dtype=np.int64)


def circle_boundary(vertices: np.ndarray, loop: np.ndarray) -> np.ndarray:
    """Unit-circle positions for a boundary loop, angles proportional to cumulative arc length."""
    points = vertices[loop]
    lengths = np.linalg.norm(np.roll(points, -1, axis=0) - points, axis=1)
    total = float(lengths.sum())
    if total <= 0:
        angles = 2.0 * math.pi * np.arange(len(loop)) / len(loop)
    else:
        angles = 2.0 * math.pi * np.concatenate([[0.0], np.cumsum(lengths[:-1])]) / total
    return np.stack([np.cos(angles), np.sin(angles)], axis=1)


def harmonic_flatten(
    sub: SubMesh,
    weights: FlattenWeights | str = FlattenWeights.COTANGENT,
    tolerance: float = 1e-10,
    max_iter_factor: int = 10,
) -> UVChart:
    """Harmonic map of a disk-topology submesh onto the unit disk."""
    weights = FlattenWeights(weights)
    loop = boundary_loop(sub)
    mesh = sub.mesh
    n = mesh.vertex_count
    uv = np.zeros((n, 2))
    uv[loop] = circle_boundary(mesh.vertices, loop)

    if weights is FlattenWeights.COTANGENT:
        edges, w = cotangent_edge_weights(mesh.vertices, mesh.faces, clamp=True)
    else:
        edges, w = uniform_edge_weights(mesh.faces)
    laplacian = graph_laplacian(n, edges, w)

    is_boundary = np.zeros(n, dtype=bool)
    is_boundary[loop] = True
    interior = np.flatnonzero(~is_boundary)
    residual = 0.0
    if interior.size:
        system = laplacian[interior][:, interior]
        rhs = -(laplacian[interior][:, loop] @ uv[loop])
        uv[interior], residual = solve_columns(
            system, rhs, tolerance=tolerance, max_iter=max_iter_factor * n
        )
    logger.info(
        "harmonic_flatten vertices=%d boundary=%d weights=%s residual=%.3e",
        n,
        loop.size,
        weights.value,
        residual,
    )
    return UVChart(uv=uv, boundary_loop=loop, residual=residual)


def laplacian_residual(
    sub: SubMesh, chart: UVChart, weights: FlattenWeights | str = FlattenWeights.COTANGENT
) -> float:
    """Largest interior residual of the discrete Laplace equation for ``chart``."""
    mesh = sub.mesh
    if FlattenWeights(weights) is FlattenWeights.COTANGENT:
        edges, w = cotangent_edge_weights(mesh.vertices, mesh.faces, clamp=True)
    else:
        edges, w = uniform_edge_weights(mesh.faces)
    laplacian = graph_laplacian(mesh.vertex_count, edges, w)
    interior = np.ones(mesh.vertex_count, dtype=bool)
    interior[chart.boundary_loop] = False
    if not interior.any():
        return 0.0
    return float(np.max(np.abs((laplacian @ chart.uv)[interior])))


def flipped_triangles(chart: UVChart, faces: np.ndarray) -> np.ndarray:
    """Indices of faces with non-positive signed area in uv."""
    p = chart.uv[np.asarray(faces, dtype=np.int64)]
    signed = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (p[:, 2, 0] - p[:, 0, 0]) * (
        p[:, 1, 1] - p[:, 0, 1]
    )
    return np.flatnonzero(signed <= 0)


def backproject_polygon(sub: SubMesh, chart: UVChart, polygon: Any) -> np.ndarray:
    """Sorted parent vertex indices whose uv lies inside or on a simple polygon."""
    points = np.asarray(polygon, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 2 or len(points) < 3:
        raise InvalidPolygonError(f"polygon needs at least 3 [u, v] points, got shape {points.shape}")
    if not np.all(np.isfinite(points)):
        raise InvalidPolygonError("polygon has non-finite coordinates")
    shape = Polygon(points)
    if not shape.is_valid or shape.area <= 0:
        raise InvalidPolygonError(f"polygon is not simple: {explain_validity(shape)}")
    inside = shapely.covers(shape, shapely.points(chart.uv))
    selected = np.sort(sub.parent_index_map[np.asarray(inside, dtype=bool)])
    logger.debug("backproject_polygon points=%d selected=%d", len(points), selected.size)
    return selected


def chart_to_dict(sub: SubMesh, chart: UVChart, curvature: np.ndarray | None = None) -> dict:
    return {
        "vertices": sub.mesh.vertices.tolist(),
        "faces": sub.mesh.faces.tolist(),
        "parent_index_map": sub.parent_index_map.tolist(),
        "boundary_loop": chart.boundary_loop.tolist(),
        "uv": chart.uv.tolist(),
        "residual": chart.residual,
        "curvature": None if curvature is None else np.asarray(curvature).tolist(),
    }


def chart_from_dict(data: dict) -> tuple[SubMesh, UVChart]:
    try:
        sub = SubMesh(
            TriMesh(np.asarray(data["vertices"], dtype=np.float64), np.asarray(data["faces"], dtype=np.int64)),
            np.asarray(data["parent_index_map"], dtype=np.int64),
        )
        uv = np.asarray(data["uv"], dtype=np.float64).reshape(-1, 2)
        chart = UVChart(uv, np.asarray(data["boundary_loop"], dtype=np.int64), float(data.get("residual", 0.0)))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed chart file: {exc}") from None
    if len(uv) != sub.mesh.vertex_count:
        raise ValueError("chart uv count does not match its vertex count")
    return sub, chart
