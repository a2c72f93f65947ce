"""Challenge evaluation: teeth localization (TLA), segmentation (TSA) and identification (TIR).

All three metrics are pooled over every ground-truth tooth of every scan.
A scan whose prediction is missing or unusable is scored with a nominal
normalized distance of 5 per ground-truth tooth, F1 0 and no identification.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import StrEnum

import numpy as np
import pandas as pd
from beartype import BeartypeConf, beartype
from scipy.spatial.distance import cdist

from . import diagnostics as diag
from .diagnostics import EMPTY, Diagnostics
from .errors import EmptyEvaluationError
from .mesh_types import ScanAnnotation, SizeDefinition, ToothInstance, TriMesh
from .validators import extract_instances_with_diagnostics

logger = logging.getLogger(__name__)

MISSING_PENALTY = 5.0

_scalar = beartype(conf=BeartypeConf(is_pep484_tower=True))


class TsaAveraging(StrEnum):
    GT_ONLY = "gt_only"
    SYMMETRIC = "symmetric"


@dataclass(frozen=True)
class ToothRecord:
    """Scores of one ground-truth tooth."""

    gt_instance_id: int
    gt_label: int
    normalized_distance: float
    f1: float
    identified: bool
    nearest_pred_id: int | None = None
    matched_pred_id: int | None = None

    def to_dict(self) -> dict:
        return {
            "gt_instance_id": self.gt_instance_id,
            "gt_label": self.gt_label,
            "normalized_distance": self.normalized_distance,
            "f1": self.f1,
            "identified": self.identified,
            "nearest_pred_id": self.nearest_pred_id,
            "matched_pred_id": self.matched_pred_id,
        }


@dataclass(frozen=True)
class PredRecord:
    """F1 of one predicted instance against its best-overlapping ground-truth tooth."""

    pred_instance_id: int
    pred_label: int
    f1: float
    matched_gt_id: int | None = None

    def to_dict(self) -> dict:
        return {
            "pred_instance_id": self.pred_instance_id,
            "pred_label": self.pred_label,
            "f1": self.f1,
            "matched_gt_id": self.matched_gt_id,
        }


@dataclass(frozen=True)
class ScanEvalPartial:
    scan_id: str
    records: tuple[ToothRecord, ...]
    missing_output: bool = False
    pred_records: tuple[PredRecord, ...] = ()
    diagnostics: Diagnostics = EMPTY

    @property
    def gt_tooth_count(self) -> int:
        return len(self.records)

    def to_dict(self) -> dict:
        return {
            "scan_id": self.scan_id,
            "missing_output": self.missing_output,
            "gt_tooth_count": self.gt_tooth_count,
            "records": [r.to_dict() for r in self.records],
            "pred_records": [r.to_dict() for r in self.pred_records],
            "diagnostics": self.diagnostics.to_list(),
        }


@dataclass(frozen=True)
class EvalReport:
    tla: float
    exp_neg_tla: float
    tsa: float
    tir: float
    score: float
    pooled_gt_teeth: int
    per_scan: tuple[ScanEvalPartial, ...] = field(default=())
    tsa_averaging: TsaAveraging = TsaAveraging.GT_ONLY

    @property
    def missing_scans(self) -> list[str]:
        return [p.scan_id for p in self.per_scan if p.missing_output]

    def to_dict(self) -> dict:
        return {
            "tla": self.tla,
            "exp_neg_tla": self.exp_neg_tla,
            "tsa": self.tsa,
            "tir": self.tir,
            "score": self.score,
            "pooled_gt_teeth": self.pooled_gt_teeth,
            "tsa_averaging": self.tsa_averaging.value,
            "per_scan": [p.to_dict() for p in self.per_scan],
        }


@_scalar
def f1(precision: float, recall: float) -> float:
    """Harmonic mean of precision and recall, 0 when both are 0."""
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


@_scalar
def global_score(exp_neg_tla: float, tsa: float, tir: float) -> float:
    """Leaderboard score: unweighted mean of Exp(-TLA), TSA and TIR."""
    return (exp_neg_tla + tsa + tir) / 3.0


def missing_partial(
    scan_id: str,
    gt_teeth: Sequence[ToothInstance],
    penalty: float = MISSING_PENALTY,
    diagnostics: Diagnostics = EMPTY,
) -> ScanEvalPartial:
    records = tuple(ToothRecord(t.instance_id, t.label, penalty, 0.0, False) for t in gt_teeth)
    return ScanEvalPartial(scan_id, records, missing_output=True, diagnostics=diagnostics)


def _best_overlap(ids: np.ndarray, allowed: np.ndarray) -> tuple[int | None, int]:
    """Most frequent allowed id among ``ids`` (smaller id on ties) and its count."""
    ids = ids[np.isin(ids, allowed)]
    if ids.size == 0:
        return None, 0
    counts = np.bincount(ids)
    best = int(np.argmax(counts))
    return best, int(counts[best])


def evaluate_scan(
    gt_mesh: TriMesh,
    gt_annotation: ScanAnnotation,
    pred: ScanAnnotation | None,
    *,
    scan_id: str | None = None,
    size_definition: SizeDefinition | str = SizeDefinition.BOUNDING_SPHERE,
    missing_penalty: float = MISSING_PENALTY,
    pred_centroids: Sequence[tuple[Sequence[float], int]] | None = None,
) -> ScanEvalPartial:
    """Score one prediction against its ground truth.

    ``pred`` is ``None`` for a missing output. ``pred_centroids`` is an
    optional explicit list of ``(point, label)`` pairs that replaces the
    instance centroids for localization and identification.
    """
    scan_id = scan_id if scan_id is not None else gt_annotation.stem
    gt_all, gt_diagnostics = extract_instances_with_diagnostics(gt_mesh, gt_annotation, size_definition)
    gt_teeth = [t for t in gt_all if t.scoreable]

    if pred is None:
        found = Diagnostics.of([diag.error("missing-output", f"no prediction for scan {scan_id}")])
        return missing_partial(scan_id, gt_teeth, missing_penalty, found)
    if pred.vertex_count != gt_mesh.vertex_count:
        found = Diagnostics.of(
            [
                diag.error(
                    "length-mismatch",
                    f"prediction has {pred.vertex_count} entries, mesh has {gt_mesh.vertex_count} vertices",
                )
            ]
        )
        return missing_partial(scan_id, gt_teeth, missing_penalty, found)

    pred_all, pred_diagnostics = extract_instances_with_diagnostics(gt_mesh, pred, size_definition)
    pred_teeth = [t for t in pred_all if t.label != 0]
    pred_ids = np.asarray([t.instance_id for t in pred_teeth], dtype=np.int64)
    pred_by_id = {t.instance_id: t for t in pred_teeth}

    if pred_centroids is not None:
        points = np.asarray([p for p, _ in pred_centroids], dtype=np.float64).reshape(-1, 3)
        labels = [int(lab) for _, lab in pred_centroids]
        channel_ids = list(range(1, len(labels) + 1))
    else:
        points = np.asarray([t.centroid for t in pred_teeth], dtype=np.float64).reshape(-1, 3)
        labels = [t.label for t in pred_teeth]
        channel_ids = [t.instance_id for t in pred_teeth]

    gt_ids = np.asarray([t.instance_id for t in gt_teeth], dtype=np.int64)
    gt_by_id = {t.instance_id: t for t in gt_teeth}
    distances = cdist(np.asarray([t.centroid for t in gt_teeth]).reshape(-1, 3), points) if len(points) else None

    records: list[ToothRecord] = []
    for row, tooth in enumerate(gt_teeth):
        if distances is None:
            distance, nearest_id, identified = missing_penalty, None, False
        else:
            nearest = int(np.argmin(distances[row]))
            raw = float(distances[row, nearest])
            distance = raw / tooth.size
            nearest_id = channel_ids[nearest]
            identified = raw < tooth.size / 2.0 and labels[nearest] == tooth.label

        matched, overlap = _best_overlap(pred.instances[tooth.vertex_ids], pred_ids)
        score = 0.0
        if matched is not None:
            precision = overlap / pred_by_id[matched].vertex_ids.size
            recall = overlap / tooth.vertex_ids.size
            score = f1(precision, recall)
        records.append(ToothRecord(tooth.instance_id, tooth.label, distance, score, identified, nearest_id, matched))

    pred_records: list[PredRecord] = []
    for tooth in pred_teeth:
        matched, overlap = _best_overlap(gt_annotation.instances[tooth.vertex_ids], gt_ids)
        score = 0.0
        if matched is not None:
            precision = overlap / tooth.vertex_ids.size
            recall = overlap / gt_by_id[matched].vertex_ids.size
            score = f1(precision, recall)
        pred_records.append(PredRecord(tooth.instance_id, tooth.label, score, matched))

    found = [
        diag.warning(d.code, f"prediction: {d.message}", d.index) for d in pred_diagnostics
    ] + [diag.warning(d.code, f"ground truth: {d.message}", d.index) for d in gt_diagnostics]
    if not pred_teeth and pred_centroids is None:
        found.append(diag.warning("empty-prediction", "prediction has no tooth instance"))
    partial = ScanEvalPartial(scan_id, tuple(records), False, tuple(pred_records), Diagnostics.of(found))
    logger.debug(
        "evaluate_scan scan=%s gt_teeth=%d pred_teeth=%d", scan_id, len(gt_teeth), len(pred_teeth)
    )
    return partial


def aggregate(
    partials: Sequence[ScanEvalPartial],
    tsa_averaging: TsaAveraging | str = TsaAveraging.GT_ONLY,
) -> EvalReport:
    """Pool per-tooth records of all scans into the leaderboard metrics."""
    tsa_averaging = TsaAveraging(tsa_averaging)
    records = [r for p in partials for r in p.records]
    if not partials or not records:
        raise EmptyEvaluationError("nothing to evaluate: no ground-truth tooth in the input")
    n = len(records)
    tla = math.fsum(r.normalized_distance for r in records) / n
    f1_values = [r.f1 for r in records]
    if tsa_averaging is TsaAveraging.SYMMETRIC:
        f1_values += [r.f1 for p in partials for r in p.pred_records]
    tsa = math.fsum(f1_values) / len(f1_values)
    tir = sum(1 for r in records if r.identified) / n
    exp_neg_tla = math.exp(-tla)
    report = EvalReport(
        tla=tla,
        exp_neg_tla=exp_neg_tla,
        tsa=tsa,
        tir=tir,
        score=global_score(exp_neg_tla, tsa, tir),
        pooled_gt_teeth=n,
        per_scan=tuple(partials),
        tsa_averaging=tsa_averaging,
    )
    logger.info(
        "aggregate scans=%d teeth=%d tla=%.6f tsa=%.6f tir=%.6f score=%.6f",
        len(partials),
        n,
        tla,
        tsa,
        tir,
        report.score,
    )
    return report


def leaderboard_row(report: EvalReport, team: str) -> pd.DataFrame:
    """One-row table with the leaderboard columns ``team,expTLA,TSA,TIR,score``."""
    return pd.DataFrame(
        [
            {
                "team": team,
                "expTLA": report.exp_neg_tla,
                "TSA": report.tsa,
                "TIR": report.tir,
                "score": report.score,
            }
        ],
        columns=["team", "expTLA", "TSA", "TIR", "score"],
    )


def leaderboard_csv(rows: pd.DataFrame) -> str:
    return rows.to_csv(index=False, float_format="%.4f", lineterminator="\n")
