"""Density-based clustering of point clouds and predicted centroids."""

from __future__ import annotations

import logging
from collections import deque

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

logger = logging.getLogger(__name__)

NOISE = -1


def _as_points(points: np.ndarray) -> np.ndarray:
    return np.asarray(points, dtype=np.float64).reshape(len(points), -1) if len(points) else np.zeros((0, 3))


def dbscan(points: np.ndarray, eps: float, min_pts: int) -> np.ndarray:
    """Cluster id per point, -1 for noise.

    Neighborhoods are closed balls of radius ``eps`` that include the point
    itself. Clusters are numbered in input order of their first core point;
    a border point reachable from several clusters joins the lowest id.
    """
    if eps <= 0:
        raise ValueError(f"eps must be > 0, got {eps}")
    if min_pts < 1:
        raise ValueError(f"min_pts must be >= 1, got {min_pts}")
    pts = _as_points(points)
    n = len(pts)
    labels = np.full(n, NOISE, dtype=np.int64)
    if n == 0:
        return labels
    neighborhoods = [sorted(nb) for nb in cKDTree(pts).query_ball_point(pts, r=eps)]
    core = np.asarray([len(nb) >= min_pts for nb in neighborhoods])

    cluster = 0
    for seed in range(n):
        if not core[seed] or labels[seed] != NOISE:
            continue
        labels[seed] = cluster
        queue = deque([seed])
        while queue:
            current = queue.popleft()
            if not core[current]:
                continue
            for nb in neighborhoods[current]:
                if labels[nb] == NOISE:
                    labels[nb] = cluster
                    queue.append(nb)
        cluster += 1
    logger.debug("dbscan points=%d clusters=%d noise=%d", n, cluster, int(np.sum(labels == NOISE)))
    return labels


def density_peaks_decision(points: np.ndarray, cutoff_distance: float) -> tuple[np.ndarray, np.ndarray]:
    """Local density and distance to the nearest denser point, for every point.

    Density counts the other points closer than the cutoff; among equal
    densities the smaller index ranks higher. The densest point gets the
    largest pairwise distance of the whole set.
    """
    pts = _as_points(points)
    n = len(pts)
    distances = cdist(pts, pts)
    rho = np.sum(distances < cutoff_distance, axis=1) - 1
    delta = np.empty(n)
    largest = distances.max() if n else 0.0
    for i in range(n):
        higher = (rho > rho[i]) | ((rho == rho[i]) & (np.arange(n) < i))
        delta[i] = distances[i, higher].min() if higher.any() else largest
    return rho, delta


def density_peaks(points: np.ndarray, cutoff_distance: float, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Density-peaks clustering.

    Returns the ``k`` center indices (ascending) and, for every point, the
    position of its nearest center in that array. Centers are the ``k``
    points of largest density times distance to a denser point.
    """
    pts = _as_points(points)
    n = len(pts)
    if k <= 0:
        raise ValueError(f"k must be > 0, got {k}")
    if k > n:
        raise ValueError(f"k={k} exceeds the number of points ({n})")
    rho, delta = density_peaks_decision(pts, cutoff_distance)
    gamma = rho * delta
    ranked = sorted(range(n), key=lambda i: (-gamma[i], i))
    centers = np.sort(np.asarray(ranked[:k], dtype=np.int64))
    assignment = np.argmin(cdist(pts, pts[centers]), axis=1)
    assignment[centers] = np.arange(k)
    return centers, assignment



def offset_shift_cluster(
    points: np.ndarray,
    offsets: np.ndarray,
    gingiva_mask: np.ndarray,
    eps: float,
    min_pts: int,
) -> np.ndarray:
    """Instance id per point from DBSCAN on centroid-shifted points; gingiva and noise get 0."""
    pts = _as_points(points)
    shift = _as_points(offsets)
    mask = np.asarray(gingiva_mask, dtype=bool).reshape(-1)
    if not (len(pts) == len(shift) == len(mask)):
        raise ValueError("points, offsets and gingiva_mask must have equal lengths")
    ids = np.zeros(len(pts), dtype=np.int64)
    active = np.flatnonzero(~mask)
    if active.size == 0:
        return ids
    clusters = dbscan(pts[active] + shift[active], eps, min_pts)
    ids[active] = np.where(clusters == NOISE, 0, clusters + 1)
    return ids


def cluster_centroids(centroids: np.ndarray, eps: float, min_pts: int, keep_noise: bool = True) -> np.ndarray:
    """Collapse redundant centroid predictions: one mean per DBSCAN cluster, in cluster order.

    Noise points follow as singletons (input order) when ``keep_noise``.
    """
    pts = _as_points(centroids)
    labels = dbscan(pts, eps, min_pts)
    merged = [pts[labels == c].mean(axis=0) for c in range(int(labels.max()) + 1)] if len(pts) else []
    if keep_noise:
        merged.extend(pts[labels == NOISE])
    return np.asarray(merged, dtype=np.float64).reshape(-1, pts.shape[1] if pts.ndim == 2 else 3)
