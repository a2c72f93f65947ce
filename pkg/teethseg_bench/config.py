"""Run configuration: defaults < JSON file < environment < command-line flags.

Environment variables are ``{prefix}_{KEY}`` with the key upper-cased, e.g.
``TEETHSEG_SOLVER_TOLERANCE=1e-12``. The prefix defaults to ``TEETHSEG`` and
can itself be overridden through ``TEETHSEG_ENV_PREFIX``.
"""

from __future__ import annotations

import json
import logging
import os
from collections.abc import Mapping
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ConfigDict, Field

from .losses import DiceVariant
from .metrics import MISSING_PENALTY, TsaAveraging
from .mesh_types import SizeDefinition
from .preprocess import PcaWeighting
from .uvflatten import FlattenWeights

logger = logging.getLogger(__name__)

DEFAULT_ENV_PREFIX = "TEETHSEG"


class RunConfig(BaseModel):
    """Every tolerance and threshold used by the pipeline stages."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    vertex_merge_tolerance: float = Field(1e-6, ge=0, description="Vertex merge distance in mm")
    pca_weighting: PcaWeighting = PcaWeighting.VERTEX
    size_definition: SizeDefinition = SizeDefinition.BOUNDING_SPHERE
    tsa_averaging: TsaAveraging = TsaAveraging.GT_ONLY
    missing_penalty: float = Field(MISSING_PENALTY, ge=0, description="Normalized distance of a missed tooth")
    flatten_weights: FlattenWeights = FlattenWeights.COTANGENT
    solver_tolerance: float = Field(1e-10, gt=0, description="Infinity-norm residual target of the CG solver")
    solver_max_iter_factor: int = Field(10, ge=1, description="CG iteration cap as a multiple of the unknowns")
    walker_beta: float = Field(10.0, ge=0)
    walker_tolerance: float = Field(1e-12, gt=0)
    island_min_faces: int = Field(0, ge=0)
    closing_iterations: int = Field(1, ge=0)
    dbscan_eps: float = Field(1.0, gt=0)
    dbscan_min_pts: int = Field(3, ge=1)
    density_cutoff: float = Field(1.0, gt=0)
    iou_threshold: float = Field(0.35, gt=0, le=1)
    knn_k: int = Field(3, ge=1)
    grid_cell_size: float = Field(0.5, gt=0)
    boundary_k: int = Field(8, ge=1)
    fps_seed_index: int = Field(0, ge=0)
    igip_lambda: float = Field(0.2, ge=0)
    dice_variant: DiceVariant = DiceVariant.PRINTED
    crop_radius_factor: float = Field(1.5, gt=0)
    workers: int | None = Field(None, ge=1, description="Worker pool size; None uses the logical core count")

    def effective_workers(self) -> int:
        return self.workers or os.cpu_count() or 1

    def to_dict(self) -> dict[str, Any]:
        """Settings that can change results; the pool size cannot and is left out."""
        return self.model_dump(mode="json", exclude={"workers"})


def env_prefix(env: Mapping[str, str] | None = None) -> str:
    env = os.environ if env is None else env
    return (env.get(f"{DEFAULT_ENV_PREFIX}_ENV_PREFIX") or DEFAULT_ENV_PREFIX).strip().rstrip("_")


def _env_overrides(env: Mapping[str, str], prefix: str) -> dict[str, str]:
    """Raw string values for config keys present in ``env``; pydantic coerces them."""
    found = {}
    for key in RunConfig.model_fields:
        value = env.get(f"{prefix}_{key.upper()}")
        if value is not None and value.strip() != "":
            found[key] = value.strip()
    return found


def read_config_file(path: str | Path) -> dict[str, Any]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ValueError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValueError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ValueError(f"config file {path} must hold a JSON object")
    return data


def load_config(
    path: str | Path | None = None,
    overrides: Mapping[str, Any] | None = None,
    env: Mapping[str, str] | None = None,
) -> RunConfig:
    """Resolve the effective configuration.

    Raises:
        ValueError: unreadable file; ``pydantic.ValidationError`` (a
            ``ValueError``) on unknown keys or out-of-range values.
    """
    env = os.environ if env is None else env
    values: dict[str, Any] = {}
    if path is not None:
        values.update(read_config_file(path))
    prefix = env_prefix(env)
    from_env = _env_overrides(env, prefix)
    values.update(from_env)
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    config = RunConfig.model_validate(values)
    logger.debug("config_loaded file=%s env_keys=%s prefix=%s", path, sorted(from_env), prefix)
    return config
