"""K-nearest-neighbor upsampling of labels and logits to the full-resolution scan."""

from __future__ import annotations

from enum import StrEnum

import numpy as np
from scipy.spatial import cKDTree


class InterpolationMode(StrEnum):
    VOTE = "vote"
    LOGIT = "logit"


def knn_label_interpolate(
    labeled_points: np.ndarray,
    values: np.ndarray,
    query_points: np.ndarray,
    k: int = 3,
    mode: InterpolationMode | str = InterpolationMode.VOTE,
) -> np.ndarray:
    """Transfer per-point labels (vote) or logits (inverse-distance weighted) to query points.

    A query that coincides with a labeled point copies that point's value.
    Votes break ties toward the smaller label.
    """
    mode = InterpolationMode(mode)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    source = np.asarray(labeled_points, dtype=np.float64)
    queries = np.asarray(query_points, dtype=np.float64)
    data = np.asarray(values)
    if len(source) == 0:
        raise ValueError("labeled point set is empty")
    if len(data) != len(source):
        raise ValueError("values must have one entry per labeled point")
    k = min(k, len(source))
    distance, neighbor = cKDTree(source).query(queries, k=k)
    distance = np.asarray(distance, dtype=np.float64).reshape(len(queries), k)
    neighbor = np.asarray(neighbor, dtype=np.int64).reshape(len(queries), k)

    if mode is InterpolationMode.VOTE:
        labels = data.astype(np.int64).reshape(-1)
        out = np.empty(len(queries), dtype=np.int64)
        for q in range(len(queries)):
            exact = neighbor[q][distance[q] == 0.0]
            if exact.size:
                out[q] = labels[int(exact.min())]
                continue
            found, counts = np.unique(labels[neighbor[q]], return_counts=True)
            out[q] = found[int(np.argmax(counts))]
        return out

    logits = data.astype(np.float64).reshape(len(source), -1)
    out_logits = np.empty((len(queries), logits.shape[1]))
    for q in range(len(queries)):
        exact = neighbor[q][distance[q] == 0.0]
        if exact.size:
            out_logits[q] = logits[int(exact.min())]
            continue
        weights = 1.0 / distance[q]
        out_logits[q] = weights @ logits[neighbor[q]] / weights.sum()
    return out_logits.reshape((len(queries),) + data.shape[1:])
