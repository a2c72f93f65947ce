"""Loss formulas of the participating methods, as plain functions on NumPy arrays.

The two centroid losses also come with analytic gradients
(``evaluate_*`` variants) valid away from nearest-target switches.
Singular configurations contribute 0 and are reported as diagnostics.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from enum import StrEnum

import numpy as np
from beartype import BeartypeConf, beartype
from scipy.spatial.distance import cdist

from . import diagnostics as diag
from .diagnostics import EMPTY, Diagnostics
from .errors import LossInputError

logger = logging.getLogger(__name__)

_checked = beartype(conf=BeartypeConf(is_pep484_tower=True))

Vector = np.ndarray | Sequence[float]
Points = np.ndarray | Sequence[Sequence[float]]


class DiceVariant(StrEnum):
    PRINTED = "printed"
    STANDARD = "standard"


@dataclass(frozen=True, eq=False)
class CentroidTargets:
    """Ground-truth tooth centroids (mm) with per-tooth radii (mm)."""

    centroids: np.ndarray
    radii: np.ndarray

    def __post_init__(self) -> None:
        c = np.asarray(self.centroids, dtype=np.float64).reshape(-1, 3)
        r = np.asarray(self.radii, dtype=np.float64).reshape(-1)
        if len(c) != len(r):
            raise LossInputError(f"{len(c)} centroids but {len(r)} radii")
        if np.any(r <= 0):
            raise LossInputError("radii must be > 0")
        object.__setattr__(self, "centroids", c)
        object.__setattr__(self, "radii", r)

    @classmethod
    def from_centroids(cls, centroids: Points) -> CentroidTargets:
        c = np.asarray(centroids, dtype=np.float64).reshape(-1, 3)
        return cls(c, np.ones(len(c)))

    def __len__(self) -> int:
        return len(self.radii)


@dataclass(frozen=True)
class LossEvaluation:
    value: float
    gradient: np.ndarray | None = None
    diagnostics: Diagnostics = EMPTY


def _points(data: Points, name: str) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    if arr.size == 0:
        raise LossInputError(f"{name} is empty")
    arr = arr.reshape(len(arr), -1)
    if not np.all(np.isfinite(arr)):
        raise LossInputError(f"{name} has non-finite entries")
    return arr


@_checked
def smooth_l1(x: Vector) -> float:
    """Sum of 0.5 x^2 where |x| < 1, else |x| - 0.5."""
    v = np.abs(np.asarray(x, dtype=np.float64))
    return float(np.sum(np.where(v < 1.0, 0.5 * v * v, v - 0.5)))


def _smooth_l1_grad(x: np.ndarray) -> np.ndarray:
    return np.where(np.abs(x) < 1.0, x, np.sign(x))


@_checked
def chamfer_distance(a: Points, b: Points) -> float:
    """Mean nearest distance from A to B plus mean nearest distance from B to A (unsquared)."""
    pa, pb = _points(a, "A"), _points(b, "B")
    d = cdist(pa, pb)
    return float(d.min(axis=1).mean() + d.min(axis=0).mean())


def _chamfer_grad(pa: np.ndarray, pb: np.ndarray) -> np.ndarray:
    """Gradient of the chamfer distance with respect to the points of A."""
    d = cdist(pa, pb)
    grad = np.zeros_like(pa)
    nearest_b = np.argmin(d, axis=1)
    diff = pa - pb[nearest_b]
    dist = d[np.arange(len(pa)), nearest_b]
    ok = dist > 0
    grad[ok] += diff[ok] / dist[ok, None] / len(pa)
    nearest_a = np.argmin(d, axis=0)
    for k, i in enumerate(nearest_a.tolist()):
        if d[i, k] > 0:
            grad[i] += (pa[i] - pb[k]) / d[i, k] / len(pb)
    return grad


def _two_nearest(source: np.ndarray, targets: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    order = np.argsort(cdist(source, targets), axis=1, kind="stable")
    return order[:, 0], order[:, 1]


def evaluate_igip_centroid_loss(predicted: Points, targets: CentroidTargets, lam: float = 0.2) -> LossEvaluation:
    """Centroid loss with separation ratio and chamfer terms, plus its gradient w.r.t. ``predicted``.

    ``(1/M) sum_i [smooth_l1(p_i - c_i1) + lam |p_i - c_i1| / |p_i - c_i2|] + chamfer(P, C)``
    with c_i1, c_i2 the nearest and second-nearest targets of p_i.
    """
    pred = _points(predicted, "predicted centroids")
    if len(targets) < 2:
        raise LossInputError("the separation term needs at least 2 target centroids")
    c = targets.centroids
    m = len(pred)
    first, second = _two_nearest(pred, c)
    diff1 = pred - c[first]
    diff2 = pred - c[second]
    d1 = np.linalg.norm(diff1, axis=1)
    d2 = np.linalg.norm(diff2, axis=1)

    found: list[diag.Diagnostic] = []
    grad = np.zeros_like(pred)
    total = 0.0
    for i in range(m):
        total += smooth_l1(diff1[i])
        grad[i] += _smooth_l1_grad(diff1[i]) / m
        if d2[i] == 0.0:
            found.append(diag.warning("separation-singular", "prediction coincides with its second target", i))
            continue
        total += lam * d1[i] / d2[i]
        unit1 = diff1[i] / d1[i] if d1[i] > 0 else np.zeros(3)
        grad[i] += lam * (unit1 / d2[i] - d1[i] * diff2[i] / d2[i] ** 3) / m
    value = total / m + chamfer_distance(pred, c)
    grad += _chamfer_grad(pred, c)
    return LossEvaluation(float(value), grad, Diagnostics.of(found))


@_checked
def igip_centroid_loss(predicted: Points, targets: CentroidTargets, lam: float = 0.2) -> float:
    return evaluate_igip_centroid_loss(predicted, targets, lam).value


def evaluate_champers_centroid_loss(
    points: Points,
    offsets: Points,
    targets: CentroidTargets,
    k: int | None = None,
) -> LossEvaluation:
    """Normalized-Euclidean plus separation loss on shifted points, with gradient w.r.t. ``offsets``.

    Targets are ranked by distance from the unshifted point. ``k`` defaults
    to the number of points.
    """
    p = _points(points, "points")
    o = _points(offsets, "offsets")
    if p.shape != o.shape:
        raise LossInputError("points and offsets must have the same shape")
    if len(targets) < 2:
        raise LossInputError("the separation term needs at least 2 target centroids")
    k = len(p) if k is None else k
    if k < 1:
        raise LossInputError(f"K must be >= 1, got {k}")
    c, r = targets.centroids, targets.radii
    first, second = _two_nearest(p, c)
    shifted = p + o
    diff1 = shifted - c[first]
    diff2 = shifted - c[second]
    e1 = np.linalg.norm(diff1, axis=1)
    e2 = np.linalg.norm(diff2, axis=1)
    r1, r2 = r[first], r[second]

    found: list[diag.Diagnostic] = []
    grad = 2.0 * diff1 / r1[:, None] / k
    euclidean = float(np.sum(e1 * e1 / r1)) / k
    separation = 0.0
    for i in range(len(p)):
        if e2[i] == 0.0:
            found.append(diag.warning("separation-singular", "shifted point coincides with its second target", i))
            continue
        ratio = r2[i] / r1[i]
        separation += ratio * e1[i] / e2[i]
        unit1 = diff1[i] / e1[i] if e1[i] > 0 else np.zeros(3)
        grad[i] += ratio * (unit1 / e2[i] - e1[i] * diff2[i] / e2[i] ** 3) / k
    return LossEvaluation(euclidean + separation / k, grad, Diagnostics.of(found))


@_checked
def champers_centroid_loss(points: Points, offsets: Points, targets: CentroidTargets, k: int | None = None) -> float:
    return evaluate_champers_centroid_loss(points, offsets, targets, k).value


def evaluate_dice_ce_loss(
    probabilities: Points,
    targets: Points,
    w0: float,
    w1: float,
    variant: DiceVariant | str = DiceVariant.PRINTED,
) -> LossEvaluation:
    """Weighted Dice and cross-entropy over a batch of class distributions.

    ``printed``: ``w0 * 2 sum(p y) / (sum(p^2) + sum(p^2 y^2)) - w1 * CE`` term as published;
    ``standard``: ``w0 * (1 - 2 sum(p y) / (sum(p^2) + sum(y^2)))``. The
    cross-entropy part is ``-mean over samples of sum_c y_c log p_c``.
    """
    variant = DiceVariant(variant)
    p = _points(probabilities, "probabilities")
    y = _points(targets, "targets")
    if p.shape != y.shape:
        raise LossInputError(f"probabilities {p.shape} and targets {y.shape} differ in shape")
    if np.any(p < 0) or np.any(p > 1):
        raise LossInputError("probabilities must lie in [0, 1]")
    if not np.allclose(y.sum(axis=1), 1.0, rtol=0.0, atol=1e-12):
        raise LossInputError("every target row must sum to 1")

    found: list[diag.Diagnostic] = []
    overlap = float(np.sum(p * y))
    if variant is DiceVariant.PRINTED:
        denominator = float(np.sum(p * p) + np.sum(p * p * y * y))
    else:
        denominator = float(np.sum(p * p) + np.sum(y * y))
    if denominator == 0.0:
        found.append(diag.warning("dice-undefined", "all probabilities are zero, dice term set to 0"))
        dice = 0.0
    else:
        dice = 2.0 * overlap / denominator
    dice_term = dice if variant is DiceVariant.PRINTED else 1.0 - dice

    ce = 0.0
    if w1 != 0.0:
        hot = y > 0
        if np.any(p[hot] == 0.0):
            row = int(np.flatnonzero(np.any(hot & (p == 0.0), axis=1))[0])
            found.append(diag.error("infinite-cross-entropy", "zero probability at a true class", row))
            return LossEvaluation(math.inf, None, Diagnostics.of(found))
        ce = -float(np.sum(y[hot] * np.log(p[hot]))) / len(p)
    return LossEvaluation(w0 * dice_term + w1 * ce, None, Diagnostics.of(found))


@_checked
def dice_ce_loss(
    probabilities: Points,
    targets: Points,
    w0: float,
    w1: float,
    variant: DiceVariant | str = DiceVariant.PRINTED,
) -> float:
    return evaluate_dice_ce_loss(probabilities, targets, w0, w1, variant).value


@_checked
def patch_distance_weight(s: Vector, c: Vector) -> float:
    """``exp(-2 |s - c|)``."""
    return math.exp(-2.0 * float(np.linalg.norm(np.asarray(s, dtype=np.float64) - np.asarray(c, dtype=np.float64))))


def patch_distance_weights(points: np.ndarray, center: np.ndarray) -> np.ndarray:
    return np.exp(-2.0 * np.linalg.norm(np.asarray(points, dtype=np.float64) - center, axis=1))


def periphery_filter(points: Points, predicted_distances: Vector, threshold: float) -> np.ndarray:
    """Indices whose predicted distance to the arch is at most ``threshold``."""
    distances = np.asarray(predicted_distances, dtype=np.float64).reshape(-1)
    if len(distances) != len(points):
        raise LossInputError("one predicted distance per point is required")
    return np.flatnonzero(distances <= threshold)
