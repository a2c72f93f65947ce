"""Dental-arch parabola fitting and FDI label-sequence correction."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateFitError, TooManyTeethError
from ..fdi import Jaw, arch_sequence

logger = logging.getLogger(__name__)

MAX_TEETH = 16


@dataclass(frozen=True)
class ArchCurve:
    """Parabola ``y = a x^2 + b x + c`` in the occlusal (xOy) plane."""

    a: float
    b: float
    c: float
    residual: float = 0.0

    def __call__(self, x: np.ndarray | float) -> np.ndarray | float:
        return self.a * np.square(x) + self.b * x + self.c

    def project(self, points: np.ndarray) -> np.ndarray:
        """x parameter of the closest curve point for every (x, y[, z]) point; smaller x on ties."""
        pts = np.asarray(points, dtype=np.float64).reshape(len(points), -1)
        out = np.empty(len(pts))
        a, b, c = self.a, self.b, self.c
        for i, (px, py) in enumerate(pts[:, :2]):
            # stationary points of the squared distance to the curve
            roots = np.roots([2 * a * a, 3 * a * b, b * b + 2 * a * (c - py) + 1.0, b * (c - py) - px])
            real = np.sort(roots[np.abs(roots.imag) <= 1e-9 * (1.0 + np.abs(roots.real))].real)
            if real.size == 0:
                real = np.array([px])
            dist = (real - px) ** 2 + (a * real**2 + b * real + c - py) ** 2
            out[i] = real[int(np.argmin(dist))]
        return out

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "c": self.c, "residual": self.residual}


def fit_arch_curve(centroids: np.ndarray) -> ArchCurve:
    """Least-squares parabola through the xOy projection of tooth centroids."""
    pts = np.asarray(centroids, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] < 2:
        raise ValueError("centroids must be an (n, 2) or (n, 3) array")
    if len(pts) < 3:
        raise DegenerateFitError(f"a parabola needs at least 3 centroids, got {len(pts)}")
    x, y = pts[:, 0], pts[:, 1]
    design = np.stack([x * x, x, np.ones_like(x)], axis=1)
    coefficients, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < 3:
        raise DegenerateFitError("centroid x coordinates do not determine a parabola (need 3 distinct values)")
    residual = float(np.sum((design @ coefficients - y) ** 2))
    a, b, c = (float(v) for v in coefficients)
    logger.debug("fit_arch_curve n=%d a=%.6g b=%.6g c=%.6g residual=%.3e", len(pts), a, b, c, residual)
    return ArchCurve(a, b, c, residual)


def align_to_arch(observed: Sequence[int], expected: Sequence[int]) -> list[int]:
    """Relabel an arch-ordered label sequence with strictly increasing positions of ``expected``.

    Minimizes, in order: the number of edits (a changed label, or two
    neighbors carrying each other's label, counts one), the number of
    labels absent from ``observed``, the number of skipped positions
    between the first and last tooth, then the position sequence itself
    (lexicographically).
    """
    n = len(observed)
    m = len(expected)
    if n == 0:
        return []
    if n > m:
        raise TooManyTeethError(f"{n} teeth do not fit an arch of {m} positions")
    present = set(observed)
    where = {label: p for p, label in enumerate(expected)}

    def mismatch(k: int, p: int) -> int:
        return int(observed[k] != expected[p])

    def fresh(p: int) -> int:
        return int(expected[p] not in present)

    State = tuple[int, int, tuple[int, ...]]
    best: tuple[int, int, int, tuple[int, ...]] | None = None
    for start in range(m - n + 1):
        layers: list[dict[int, State]] = [{start: (mismatch(0, start), fresh(start), (start,))}]
        for k in range(1, n):
            following: dict[int, State] = {}
            for p in range(start + k, m):
                options = [
                    (cost + mismatch(k, p), new + fresh(p), seq + (p,))
                    for q, (cost, new, seq) in layers[-1].items()
                    if q < p
                ]
                if options:
                    following[p] = min(options)
            # teeth k-1 and k exchanged: each sits where the other's label belongs
            q, p = where.get(observed[k]), where.get(observed[k - 1])
            if q is not None and p is not None and q < p:
                before: dict[int, State] = layers[-2] if k > 1 else ({-1: (0, 0, ())} if q == start else {})
                swaps = [(cost + 1, new, seq + (q, p)) for r, (cost, new, seq) in before.items() if r < q]
                if swaps:
                    candidate = min(swaps)
                    if p not in following or candidate < following[p]:
                        following[p] = candidate
            layers.append(following)
        for end, (cost, new, seq) in layers[-1].items():
            candidate = (cost, new, end - start, seq)
            if best is None or candidate < best:
                best = candidate
    assert best is not None
    return [expected[p] for p in best[3]]


def arch_label_correct(
    teeth: Sequence[tuple[Sequence[float], int]],
    curve: ArchCurve,
    jaw: Jaw | str,
) -> list[int]:
    """Repair duplicate and out-of-order FDI labels by aligning them to the arch order.

    Teeth are ordered by the x parameter of their projection onto ``curve``;
    the result is returned in input order and holds no duplicate label.
    """
    if len(teeth) > MAX_TEETH:
        raise TooManyTeethError(f"{len(teeth)} teeth exceed the {MAX_TEETH} positions of a jaw")
    if not teeth:
        return []
    centroids = np.asarray([c for c, _ in teeth], dtype=np.float64)
    labels = [int(lab) for _, lab in teeth]
    t = curve.project(centroids)
    order = sorted(range(len(teeth)), key=lambda i: (t[i], i))
    aligned = align_to_arch([labels[i] for i in order], arch_sequence(jaw))
    corrected = [0] * len(teeth)
    for i, label in zip(order, aligned):
        corrected[i] = label
    changed = sum(1 for old, new in zip(labels, corrected) if old != new)
    if changed:
        logger.info("arch_label_correct teeth=%d relabeled=%d", len(teeth), changed)
    return corrected
