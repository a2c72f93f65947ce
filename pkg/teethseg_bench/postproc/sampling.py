"""Point sampling: farthest-point, boundary-aware, grid subsampling and patch cropping."""

from __future__ import annotations

import logging

import numpy as np
from scipy.spatial import cKDTree

from ..losses import patch_distance_weights

logger = logging.getLogger(__name__)


def farthest_point_sampling(points: np.ndarray, n: int, seed_index: int = 0) -> np.ndarray:
    """Greedy max-min selection of ``n`` indices starting at ``seed_index`` (smaller index on ties)."""
    pts = np.asarray(points, dtype=np.float64)
    count = len(pts)
    if n <= 0:
        raise ValueError(f"n must be > 0, got {n}")
    if n > count:
        raise ValueError(f"n={n} exceeds the number of points ({count})")
    if not 0 <= seed_index < count:
        raise ValueError(f"seed_index {seed_index} out of range")
    selected = np.empty(n, dtype=np.int64)
    selected[0] = seed_index
    nearest = np.linalg.norm(pts - pts[seed_index], axis=1)
    nearest[seed_index] = -1.0
    for step in range(1, n):
        pick = int(np.argmax(nearest))
        selected[step] = pick
        nearest = np.minimum(nearest, np.linalg.norm(pts - pts[pick], axis=1))
        nearest[selected[: step + 1]] = -1.0
    return selected


def boundary_points(points: np.ndarray, instance_ids: np.ndarray, k_neighbors: int) -> np.ndarray:
    """Indices whose ``k_neighbors`` nearest points (itself included) carry at least two distinct ids."""
    if k_neighbors < 2:
        raise ValueError(f"k_neighbors must be >= 2, got {k_neighbors}")
    pts = np.asarray(points, dtype=np.float64)
    ids = np.asarray(instance_ids, dtype=np.int64).reshape(-1)
    if len(ids) != len(pts):
        raise ValueError("points and instance_ids must have equal lengths")
    if len(pts) == 0:
        return np.zeros(0, dtype=np.int64)
    k = min(k_neighbors, len(pts))
    _, knn = cKDTree(pts).query(pts, k=k)
    knn = np.asarray(knn).reshape(len(pts), -1)
    neighbor_ids = ids[knn]
    mixed = np.any(neighbor_ids != neighbor_ids[:, :1], axis=1)
    return np.flatnonzero(mixed)


def boundary_aware_sample(
    points: np.ndarray,
    instance_ids: np.ndarray,
    k_neighbors: int,
    n_extra: int,
    seed_index: int = 0,
) -> np.ndarray:
    """Farthest-point sample of up to ``n_extra`` points from the instance-boundary set.

    Sampling starts at the boundary point nearest to ``points[seed_index]``.
    An empty boundary yields an empty result.
    """
    pts = np.asarray(points, dtype=np.float64)
    boundary = boundary_points(pts, instance_ids, k_neighbors)
    if boundary.size == 0 or n_extra <= 0:
        return np.zeros(0, dtype=np.int64)
    d = np.linalg.norm(pts[boundary] - pts[seed_index], axis=1)
    start = int(np.argmin(d))
    local = farthest_point_sampling(pts[boundary], min(n_extra, boundary.size), start)
    logger.debug("boundary_aware_sample boundary=%d selected=%d", boundary.size, local.size)
    return boundary[local]


def grid_subsample(points: np.ndarray, cell_size: float) -> np.ndarray:
    """One index per occupied grid cell: the point nearest the cell center (smaller index on ties).

    Output follows lexicographic cell order.
    """
    if cell_size <= 0:
        raise ValueError(f"cell_size must be > 0, got {cell_size}")
    pts = np.asarray(points, dtype=np.float64)
    if len(pts) == 0:
        return np.zeros(0, dtype=np.int64)
    cells = np.floor(pts / cell_size).astype(np.int64)
    centers = (cells + 0.5) * cell_size
    distance = np.linalg.norm(pts - centers, axis=1)
    index = np.arange(len(pts))
    keys = (index, distance) + tuple(cells[:, d] for d in range(cells.shape[1] - 1, -1, -1))
    order = np.lexsort(keys)
    sorted_cells = cells[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = np.any(sorted_cells[1:] != sorted_cells[:-1], axis=1)
    return order[first]


def patch_crop(points: np.ndarray, center: np.ndarray, patch_size: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """The ``patch_size`` points nearest to ``center`` and their distance weights.

    ``patch_size`` defaults to an eighth of the cloud.
    """
    pts = np.asarray(points, dtype=np.float64)
    if patch_size is None:
        patch_size = max(1, len(pts) // 8)
    if not 0 < patch_size <= len(pts):
        raise ValueError(f"patch_size must be in 1..{len(pts)}, got {patch_size}")
    c = np.asarray(center, dtype=np.float64).reshape(-1)
    distance = np.linalg.norm(pts - c, axis=1)
    chosen = np.argsort(distance, kind="stable")[:patch_size]
    return chosen, patch_distance_weights(pts[chosen], c)


def crop_radius_from_spacing(centroids: np.ndarray, factor: float = 1.5) -> np.ndarray:
    """Per-centroid crop radius: ``factor`` times the distance to the nearest other centroid."""
    pts = np.asarray(centroids, dtype=np.float64)
    if len(pts) < 2:
        raise ValueError("crop radius from spacing needs at least 2 centroids")
    distance, _ = cKDTree(pts).query(pts, k=2)
    return factor * distance[:, 1]
