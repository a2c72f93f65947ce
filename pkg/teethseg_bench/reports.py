"""JSON and plain-text reports for the CLI subcommands."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any, cast

from jinja2 import Environment, FileSystemLoader

from .config import RunConfig
from .diagnostics import EMPTY, Diagnostics
from .metrics import EvalReport, leaderboard_csv, leaderboard_row
from .mesh_types import ScanAnnotation, TriMesh
from .preprocess import CleanupReport


def _get_jinja_env() -> Environment:
    """Get configured Jinja2 environment for report templates."""
    template_dir = Path(__file__).parent / "templates"
    return Environment(loader=FileSystemLoader(str(template_dir)), trim_blocks=True, lstrip_blocks=True)


def _json_safe(value: Any) -> Any:
    """Replace non-finite floats, which strict JSON cannot carry, by their string names."""
    if isinstance(value, float) and not math.isfinite(value):
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    return value


def dumps(document: dict[str, Any]) -> str:
    """Deterministic JSON: sorted keys, two-space indent, trailing newline."""
    return json.dumps(_json_safe(document), sort_keys=True, indent=2, allow_nan=False) + "\n"


def evaluation_document(
    report: EvalReport,
    config: RunConfig,
    diagnostics: Diagnostics = EMPTY,
    team: str | None = None,
) -> dict[str, Any]:
    document = {
        "config": config.to_dict(),
        "metrics": {
            "tla": report.tla,
            "exp_neg_tla": report.exp_neg_tla,
            "tsa": report.tsa,
            "tir": report.tir,
            "score": report.score,
            "pooled_gt_teeth": report.pooled_gt_teeth,
            "tsa_averaging": report.tsa_averaging.value,
        },
        "missing_scans": report.missing_scans,
        "per_scan": [p.to_dict() for p in report.per_scan],
        "diagnostics": diagnostics.to_list(),
    }
    if team is not None:
        document["leaderboard_csv"] = leaderboard_csv(leaderboard_row(report, team))
    return document


def document(config: RunConfig, **sections: Any) -> dict[str, Any]:
    """Generic report: the effective config plus named result sections."""
    return {"config": config.to_dict(), **sections}


def render_evaluation(report: EvalReport, diagnostics: Diagnostics = EMPTY) -> str:
    template = _get_jinja_env().get_template("evaluate.j2")
    return cast(str, template.render(report=report, diagnostics=list(diagnostics)))


def render_validation(scan_id: str, mesh: TriMesh, annotation: ScanAnnotation, diagnostics: Diagnostics) -> str:
    template = _get_jinja_env().get_template("validate.j2")
    teeth = len({int(i) for i in annotation.instances.tolist() if i != 0})
    return cast(str, template.render(scan_id=scan_id, mesh=mesh, teeth=teeth, diagnostics=list(diagnostics)))


def render_cleanup(scan_id: str, report: CleanupReport) -> str:
    template = _get_jinja_env().get_template("clean.j2")
    return cast(str, template.render(scan_id=scan_id, report=report))
