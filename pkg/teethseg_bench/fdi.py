"""FDI two-digit tooth numbering helpers.

Tens digit is the quadrant (1 upper right, 2 upper left, 3 lower left,
4 lower right), units digit the position from the midline (1..8).
Label 0 is reserved for gingiva.
"""

from __future__ import annotations

from collections.abc import Sequence
from enum import StrEnum

import numpy as np

GINGIVA = 0


class Jaw(StrEnum):
    UPPER = "upper"
    LOWER = "lower"


_QUADRANTS: dict[Jaw, tuple[int, int]] = {
    # (patient-right quadrant, patient-left quadrant)
    Jaw.UPPER: (1, 2),
    Jaw.LOWER: (4, 3),
}


def is_valid_fdi(code: int) -> bool:
    code = int(code)
    return 1 <= code // 10 <= 4 and 1 <= code % 10 <= 8


def quadrant(code: int) -> int:
    return int(code) // 10


def position(code: int) -> int:
    return int(code) % 10


def jaw_of(code: int) -> Jaw | None:
    """Jaw implied by a code's quadrant, None for gingiva or invalid codes."""
    if not is_valid_fdi(code):
        return None
    return Jaw.UPPER if quadrant(code) in (1, 2) else Jaw.LOWER


def arch_sequence(jaw: Jaw | str) -> tuple[int, ...]:
    """Expected FDI order along the arch in increasing x of a pose-normalized scan.

    upper: 18..11, 21..28 ; lower: 48..41, 31..38
    """
    right, left = _QUADRANTS[Jaw(jaw)]
    return tuple(right * 10 + p for p in range(8, 0, -1)) + tuple(left * 10 + p for p in range(1, 9))


def fdi_to_class7(code: int) -> int:
    """Collapse a code to one of seven positions; third molars fold into second molars."""
    if not is_valid_fdi(code):
        raise ValueError(f"not an FDI tooth code: {code}")
    return min(position(code), 7)


def class7_to_fdi(
    centroids: np.ndarray | Sequence[Sequence[float]],
    classes: Sequence[int],
    jaw: Jaw | str,
    midline_x: float | None = None,
) -> list[int]:
    """Translate seven-class tooth positions back to FDI codes.

    The side is decided by comparing each centroid's x to the mean x of the
    central-incisor (class 1) teeth, or to ``midline_x`` / 0 when there are none.
    When a side holds two class-7 teeth, the more distal one is the third molar.
    """
    pts = np.asarray(centroids, dtype=np.float64).reshape(-1, 3)
    cls = [int(c) for c in classes]
    if len(cls) != len(pts):
        raise ValueError("centroids and classes must have equal lengths")
    for c in cls:
        if not 1 <= c <= 7:
            raise ValueError(f"class must be in 1..7, got {c}")

    if midline_x is None:
        incisors = [i for i, c in enumerate(cls) if c == 1]
        midline_x = float(pts[incisors, 0].mean()) if incisors else 0.0

    right_q, left_q = _QUADRANTS[Jaw(jaw)]
    labels: list[int] = []
    for i, c in enumerate(cls):
        q = right_q if pts[i, 0] < midline_x else left_q
        labels.append(q * 10 + c)

    for q in (right_q, left_q):
        molars = [i for i, lab in enumerate(labels) if lab == q * 10 + 7]
        if len(molars) == 2:
            distal = max(molars, key=lambda i: (abs(pts[i, 0] - midline_x), -i))
            labels[distal] = q * 10 + 8
    return labels
