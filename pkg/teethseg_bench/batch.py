"""Directory-level evaluation: pair ground truth with predictions and score them in parallel."""

from __future__ import annotations

import dataclasses
import json
import logging
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from . import diagnostics as diag
from .config import RunConfig
from .diagnostics import Diagnostics
from .errors import EvaluationError, TeethSegError
from .mesh_io import parse_annotation, parse_obj
from .metrics import EvalReport, ScanEvalPartial, aggregate, evaluate_scan

logger = logging.getLogger(__name__)

_INT64 = np.iinfo(np.int64)

MANIFEST_COLUMNS = ("scan_id", "gt_mesh", "gt_annotation", "prediction")
CENTROIDS_SUFFIX = ".centroids.json"


@dataclass(frozen=True)
class ScanPair:
    scan_id: str
    gt_mesh: Path
    gt_annotation: Path
    prediction: Path | None = None
    centroids: Path | None = None


def _manifest_pairs(manifest: Path) -> list[ScanPair]:
    table = pd.read_csv(manifest, dtype=str, keep_default_na=False)
    missing = [c for c in MANIFEST_COLUMNS if c not in table.columns]
    if missing:
        raise EvaluationError(f"manifest {manifest} lacks columns {missing}")
    base = manifest.parent

    def resolve(cell: str) -> Path | None:
        cell = cell.strip()
        return base / cell if cell else None

    pairs = []
    for row in table.itertuples(index=False):
        gt_mesh, gt_annotation = resolve(row.gt_mesh), resolve(row.gt_annotation)
        if gt_mesh is None or gt_annotation is None:
            raise EvaluationError(f"manifest row {row.scan_id!r} needs gt_mesh and gt_annotation")
        centroids = resolve(getattr(row, "centroids", ""))
        pairs.append(ScanPair(row.scan_id.strip(), gt_mesh, gt_annotation, resolve(row.prediction), centroids))
    return pairs


def pair_scans(
    gt_dir: str | Path,
    pred_dir: str | Path | None,
    manifest: str | Path | None = None,
) -> tuple[list[ScanPair], Diagnostics]:
    """Match ``{stem}.obj``/``{stem}.json`` ground truth with ``{stem}.json`` predictions.

    A prediction may come with ``{stem}.centroids.json``, a list of
    ``{"point": [x, y, z], "label": fdi}`` objects. Pairs are sorted by scan id.
    """
    found: list[diag.Diagnostic] = []
    if manifest is not None:
        pairs = _manifest_pairs(Path(manifest))
    else:
        gt_root = Path(gt_dir)
        if not gt_root.is_dir():
            raise EvaluationError(f"ground-truth directory {gt_root} does not exist")
        pred_root = Path(pred_dir) if pred_dir is not None else None
        pairs = []
        for mesh_path in sorted(gt_root.glob("*.obj")):
            stem = mesh_path.stem
            annotation_path = gt_root / f"{stem}.json"
            if not annotation_path.is_file():
                found.append(diag.error("missing-ground-truth", f"{mesh_path.name} has no {annotation_path.name}"))
                continue
            prediction = centroids = None
            if pred_root is not None:
                candidate = pred_root / f"{stem}.json"
                prediction = candidate if candidate.is_file() else None
                candidate = pred_root / f"{stem}{CENTROIDS_SUFFIX}"
                centroids = candidate if candidate.is_file() else None
            pairs.append(ScanPair(stem, mesh_path, annotation_path, prediction, centroids))
    ids = [p.scan_id for p in pairs]
    if len(set(ids)) != len(ids):
        raise EvaluationError("scan ids must be unique")
    return sorted(pairs, key=lambda p: p.scan_id), Diagnostics.of(found)


def _read_centroids(path: Path) -> list[tuple[list[float], int]]:
    data = json.loads(path.read_text(encoding="utf-8"))
    if not isinstance(data, list):
        raise EvaluationError(f"{path.name} must hold a JSON array")
    entries: list[tuple[list[float], int]] = []
    try:
        for item in data:
            point = [float(x) for x in item["point"]]
            label = int(item["label"])
            if len(point) != 3 or not np.isfinite(point).all():
                raise ValueError(f"point must hold 3 finite coordinates, got {item['point']!r}")
            if not _INT64.min <= label <= _INT64.max:
                raise ValueError(f"label {label} is out of the 64-bit integer range")
            entries.append((point, label))
    except (KeyError, TypeError, ValueError, OverflowError) as exc:
        raise EvaluationError(f"{path.name}: malformed centroid entry ({exc})") from None
    return entries



def evaluate_pair(pair: ScanPair, config: RunConfig) -> ScanEvalPartial:
    """Score one pair. Unreadable predictions take the missing-output penalty; bad ground truth raises."""
    try:
        mesh = parse_obj(pair.gt_mesh.read_bytes())
        gt = parse_annotation(pair.gt_annotation.read_bytes(), mesh.vertex_count)
    except (OSError, TeethSegError) as exc:
        raise EvaluationError(f"ground truth of {pair.scan_id} is unusable: {exc}") from exc

    def penalized(reason: diag.Diagnostic) -> ScanEvalPartial:
        partial = evaluate_scan(
            mesh,
            gt,
            None,
            scan_id=pair.scan_id,
            size_definition=config.size_definition,
            missing_penalty=config.missing_penalty,
        )
        return dataclasses.replace(partial, diagnostics=partial.diagnostics.merge(Diagnostics.of([reason])))

    if pair.prediction is None:
        return evaluate_scan(
            mesh,
            gt,
            None,
            scan_id=pair.scan_id,
            size_definition=config.size_definition,
            missing_penalty=config.missing_penalty,
        )
    try:
        prediction = parse_annotation(pair.prediction.read_bytes(), mesh.vertex_count)
        centroids = _read_centroids(pair.centroids) if pair.centroids is not None else None
    except (OSError, json.JSONDecodeError, UnicodeDecodeError, TeethSegError) as exc:
        logger.warning("prediction_unusable scan=%s reason=%s", pair.scan_id, exc)
        return penalized(diag.error("unreadable-prediction", f"{pair.scan_id}: {exc}"))
    return evaluate_scan(
        mesh,
        gt,
        prediction,
        scan_id=pair.scan_id,
        size_definition=config.size_definition,
        missing_penalty=config.missing_penalty,
        pred_centroids=centroids,
    )


def evaluate_directory(pairs: Sequence[ScanPair], config: RunConfig) -> EvalReport:
    """Evaluate every pair on a bounded thread pool and pool the results in scan-id order."""
    ordered = sorted(pairs, key=lambda p: p.scan_id)
    workers = min(config.effective_workers(), max(len(ordered), 1))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        partials = list(pool.map(lambda pair: evaluate_pair(pair, config), ordered))
    logger.info("evaluate_directory scans=%d workers=%d", len(partials), workers)
    return aggregate(partials, config.tsa_averaging)
