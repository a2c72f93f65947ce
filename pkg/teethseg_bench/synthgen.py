"""Deterministic synthetic jaw scans with exact ground truth, and prediction perturbations.

Teeth are subdivided icospheres cut below and flattened on the occlusal
side, placed at equal arc-length spacing along a parabolic arch. A gum
band runs underneath. Every tooth draws its random parameters from its own
stream keyed by its FDI code, so adding teeth does not move existing ones.
"""

from __future__ import annotations

import json
import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Annotated, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.optimize import brentq
from scipy.spatial.distance import cdist

from .errors import PerturbError, SynthConfigError
from .fdi import GINGIVA, Jaw, arch_sequence, is_valid_fdi
from .mesh_io import write_annotation, write_obj
from .mesh_types import ScanAnnotation, SizeDefinition, TriMesh
from .metrics import MISSING_PENALTY
from .validators import tooth_size

logger = logging.getLogger(__name__)

_CUT_BELOW = -0.4
_CLAMP_ABOVE = 0.7
_GUM_DEPTH = -0.5
_GUM_COLUMNS_PER_TOOTH = 4

_PHI = (1.0 + math.sqrt(5.0)) / 2.0
_ICOSAHEDRON_VERTICES = [
    (-1, _PHI, 0), (1, _PHI, 0), (-1, -_PHI, 0), (1, -_PHI, 0),
    (0, -1, _PHI), (0, 1, _PHI), (0, -1, -_PHI), (0, 1, -_PHI),
    (_PHI, 0, -1), (_PHI, 0, 1), (-_PHI, 0, -1), (-_PHI, 0, 1),
]  # fmt: skip
_ICOSAHEDRON_FACES = [
    (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
    (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
    (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
    (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
]  # fmt: skip


class SynthConfig(BaseModel):
    """Parameters of one synthetic jaw. Lengths are in millimetres."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    patient_id: str = Field("synth0000", min_length=1, pattern=r"^[A-Za-z0-9_-]+$")
    jaw: Jaw = Jaw.UPPER
    tooth_count: int = Field(14, ge=4, le=16, description="Even number of teeth, centred on the midline")
    arch_coefficients: tuple[float, float, float] = Field(
        (-0.06, 0.0, 0.0), description="(a, b, c) of the arch parabola y = a x^2 + b x + c"
    )
    tooth_spacing: float = Field(10.0, gt=0, description="Arc length between consecutive tooth centres")
    tooth_radius: tuple[float, float] = Field((3.0, 4.0), description="Radius range [min, max]")
    subdivisions: int = Field(2, ge=0, le=5, description="Icosphere subdivision level")
    gum_width: float = Field(4.0, gt=0)
    seed: int = Field(0, ge=0, le=2**64 - 1)

    @field_validator("tooth_count")
    @classmethod
    def _even(cls, value: int) -> int:
        if value % 2:
            raise ValueError("tooth_count must be even")
        return value

    @model_validator(mode="after")
    def _radius_range(self) -> SynthConfig:
        low, high = self.tooth_radius
        if not 0 < low <= high:
            raise ValueError(f"tooth_radius must satisfy 0 < min <= max, got {self.tooth_radius}")
        return self


@dataclass(frozen=True, eq=False)
class GroundTruthExtras:
    """Closed-form facts about a generated scan, in instance-id order."""

    instance_ids: np.ndarray
    labels: np.ndarray
    centroids: np.ndarray
    sizes: np.ndarray
    sphere_centers: np.ndarray
    radii: np.ndarray
    offsets: np.ndarray

    def to_dict(self) -> dict:
        return {
            "teeth": [
                {
                    "instance_id": int(i),
                    "label": int(lab),
                    "centroid": c.tolist(),
                    "size": float(s),
                    "sphere_center": sc.tolist(),
                    "radius": float(r),
                }
                for i, lab, c, s, sc, r in zip(
                    self.instance_ids, self.labels, self.centroids, self.sizes, self.sphere_centers, self.radii
                )
            ],
            "offsets": self.offsets.tolist(),
        }


@dataclass(frozen=True, eq=False)
class SynthScan:
    mesh: TriMesh
    annotation: ScanAnnotation
    extras: GroundTruthExtras

    @property
    def stem(self) -> str:
        return self.annotation.stem


def icosphere(subdivisions: int) -> TriMesh:
    """Unit icosphere with outward-facing triangles; vertex order is deterministic."""
    if subdivisions < 0:
        raise ValueError(f"subdivisions must be >= 0, got {subdivisions}")
    vertices = [np.asarray(v, dtype=np.float64) / np.linalg.norm(v) for v in _ICOSAHEDRON_VERTICES]
    faces = list(_ICOSAHEDRON_FACES)
    for _ in range(subdivisions):
        midpoint: dict[tuple[int, int], int] = {}

        def split(a: int, b: int) -> int:
            key = (a, b) if a < b else (b, a)
            if key not in midpoint:
                m = vertices[a] + vertices[b]
                vertices.append(m / np.linalg.norm(m))
                midpoint[key] = len(vertices) - 1
            return midpoint[key]

        refined = []
        for a, b, c in faces:
            ab, bc, ca = split(a, b), split(b, c), split(c, a)
            refined += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = refined
    return TriMesh(np.asarray(vertices), np.asarray(faces, dtype=np.int64))


def _tooth_rng(seed: int, fdi: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(fdi,))))


class _Arch:
    """Arc-length parameterization of ``y = a x^2 + b x + c``, measured from the apex."""

    def __init__(self, a: float, b: float, c: float) -> None:
        self.a, self.b, self.c = a, b, c
        self.apex = -b / (2.0 * a) if a != 0 else 0.0

    def arc_length(self, x: float) -> float:
        if self.a == 0:
            return (x - self.apex) * math.sqrt(1.0 + self.b * self.b)
        u = 2.0 * self.a * x + self.b
        return (u * math.sqrt(1.0 + u * u) + math.asinh(u)) / (4.0 * self.a)

    def x_at(self, s: float) -> float:
        if s == 0:
            return self.apex
        span = abs(s) + 1.0
        return float(brentq(lambda x: self.arc_length(x) - s, self.apex - span, self.apex + span, xtol=1e-14))

    def point(self, x: float) -> np.ndarray:
        return np.array([x, self.a * x * x + self.b * x + self.c])

    def normal(self, x: float) -> np.ndarray:
        tangent = np.array([1.0, 2.0 * self.a * x + self.b])
        tangent /= np.linalg.norm(tangent)
        return np.array([-tangent[1], tangent[0]])


def _tooth_mesh(unit: TriMesh, center: np.ndarray, radius: float, angle: float) -> tuple[np.ndarray, np.ndarray]:
    keep = unit.vertices[unit.faces, 2].min(axis=1) >= _CUT_BELOW
    faces = unit.faces[keep]
    used, faces = np.unique(faces, return_inverse=True)
    faces = faces.reshape(-1, 3)
    local = unit.vertices[used].copy()
    local[:, 2] = np.minimum(local[:, 2], _CLAMP_ABOVE)
    cos, sin = math.cos(angle), math.sin(angle)
    rotation = np.array([[cos, -sin, 0.0], [sin, cos, 0.0], [0.0, 0.0, 1.0]])
    return local @ rotation.T * radius + center, faces


def _gum_band(arch: _Arch, s_start: float, s_stop: float, columns: int, width: float, z: float):
    xs = [arch.x_at(s) for s in np.linspace(s_start, s_stop, columns + 1)]
    rows = []
    for offset in (-width / 2.0, 0.0, width / 2.0):
        rows.append([np.append(arch.point(x) + offset * arch.normal(x), z) for x in xs])
    vertices = np.asarray([v for row in rows for v in row])
    stride = columns + 1
    faces = []
    for r in range(len(rows) - 1):
        for j in range(columns):
            v00, v01 = r * stride + j, r * stride + j + 1
            v10, v11 = v00 + stride, v01 + stride
            faces += [(v00, v01, v11), (v00, v11, v10)]
    faces_arr = np.asarray(faces, dtype=np.int64)
    a, b, c = (vertices[faces_arr[:, k], :2] for k in range(3))
    signed = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
    faces_arr[signed < 0] = faces_arr[signed < 0][:, ::-1]
    return vertices, faces_arr


def generate_jaw(config: SynthConfig) -> SynthScan:
    """Build one synthetic scan. Raises :class:`SynthConfigError` when teeth would overlap."""
    n = config.tooth_count
    sequence = arch_sequence(config.jaw)
    labels = sequence[8 - n // 2 : 8 + n // 2]
    arch = _Arch(*config.arch_coefficients)
    positions = [(k - (n - 1) / 2.0) * config.tooth_spacing for k in range(n)]

    centers = np.zeros((n, 3))
    radii = np.zeros(n)
    angles = np.zeros(n)
    for k, (s, fdi) in enumerate(zip(positions, labels)):
        rng = _tooth_rng(config.seed, fdi)
        radii[k] = rng.uniform(*config.tooth_radius)
        angles[k] = rng.uniform(0.0, 2.0 * math.pi)
        centers[k, :2] = arch.point(arch.x_at(s))

    gap = cdist(centers, centers) - (radii[:, None] + radii[None, :])
    np.fill_diagonal(gap, np.inf)
    if np.any(gap <= 0):
        i, j = np.unravel_index(int(np.argmin(gap)), gap.shape)
        raise SynthConfigError(
            f"teeth {labels[min(i, j)]} and {labels[max(i, j)]} overlap; increase tooth_spacing or shrink tooth_radius"
        )

    unit = icosphere(config.subdivisions)
    vertex_blocks, face_blocks, label_blocks, instance_blocks = [], [], [], []
    base = 0
    for k in range(n):
        verts, faces = _tooth_mesh(unit, centers[k], radii[k], angles[k])
        vertex_blocks.append(verts)
        face_blocks.append(faces + base)
        label_blocks.append(np.full(len(verts), labels[k], dtype=np.int64))
        instance_blocks.append(np.full(len(verts), k + 1, dtype=np.int64))
        base += len(verts)

    margin = config.tooth_spacing
    gum_verts, gum_faces = _gum_band(
        arch,
        positions[0] - margin,
        positions[-1] + margin,
        _GUM_COLUMNS_PER_TOOTH * n,
        config.gum_width,
        _GUM_DEPTH * float(radii.max()),
    )
    vertex_blocks.append(gum_verts)
    face_blocks.append(gum_faces + base)
    label_blocks.append(np.full(len(gum_verts), GINGIVA, dtype=np.int64))
    instance_blocks.append(np.zeros(len(gum_verts), dtype=np.int64))

    vertices = np.concatenate(vertex_blocks)
    mesh = TriMesh(vertices, np.concatenate(face_blocks))
    annotation = ScanAnnotation(
        config.patient_id, config.jaw, np.concatenate(label_blocks), np.concatenate(instance_blocks)
    )

    centroids = np.zeros((n, 3))
    sizes = np.zeros(n)
    offsets = np.zeros_like(vertices)
    for k in range(n):
        members = np.flatnonzero(annotation.instances == k + 1)
        centroids[k] = vertices[members].mean(axis=0)
        sizes[k] = tooth_size(vertices[members], centroids[k], SizeDefinition.BOUNDING_SPHERE)
        offsets[members] = centroids[k] - vertices[members]
    extras = GroundTruthExtras(np.arange(1, n + 1), np.asarray(labels), centroids, sizes, centers, radii, offsets)
    logger.debug(
        "generate_jaw patient=%s jaw=%s teeth=%d vertices=%d faces=%d seed=%d",
        config.patient_id,
        config.jaw.value,
        n,
        mesh.vertex_count,
        mesh.face_count,
        config.seed,
    )
    return SynthScan(mesh, annotation, extras)


def generate_dataset(config: SynthConfig, count: int) -> list[SynthScan]:
    """``count`` scans with patient ids ``{patient_id}{k:04d}`` and seeds ``seed + k``."""
    if count < 1:
        raise SynthConfigError(f"count must be >= 1, got {count}")
    if count == 1:
        return [generate_jaw(config)]
    return [
        generate_jaw(
            config.model_copy(
                update={"patient_id": f"{config.patient_id}{k:04d}", "seed": (config.seed + k) % 2**64}
            )
        )
        for k in range(count)
    ]


def write_scans(scans: Sequence[SynthScan], out_dir: str | Path) -> list[Path]:
    """Write ``{stem}.obj`` / ``{stem}.json`` per scan and one ``extras.json`` keyed by stem."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for scan in scans:
        obj_path = out / f"{scan.stem}.obj"
        obj_path.write_bytes(write_obj(scan.mesh))
        json_path = out / f"{scan.stem}.json"
        json_path.write_bytes(write_annotation(scan.annotation))
        written += [obj_path, json_path]
    extras_path = out / "extras.json"
    extras_path.write_text(
        json.dumps({scan.stem: scan.extras.to_dict() for scan in scans}, sort_keys=True) + "\n", encoding="utf-8"
    )
    written.append(extras_path)
    return written


def write_scan(scan: SynthScan, out_dir: str | Path) -> list[Path]:
    return write_scans([scan], out_dir)


# ---------------------------------------------------------------------------
# Perturbations
# ---------------------------------------------------------------------------


class SwapLabels(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)
    op: Literal["swap_labels"] = "swap_labels"
    i: int
    j: int


class DropTooth(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)
    op: Literal["drop_tooth"] = "drop_tooth"
    i: int


class JitterInstance(BaseModel):
    """Moves the predicted centroid of instance ``i`` by ``displacement`` mm.

    The direction is ``direction`` when given, else a random unit vector.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)
    op: Literal["jitter_instance"] = "jitter_instance"
    i: int
    displacement: float = Field(ge=0)
    direction: tuple[float, float, float] | None = None


class ErodeInstance(BaseModel):
    """Removes the ``fraction`` of instance ``i`` vertices farthest from its centroid."""

    model_config = ConfigDict(extra="forbid", frozen=True)
    op: Literal["erode_instance"] = "erode_instance"
    i: int
    fraction: float = Field(ge=0, lt=1)


class Relabel(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)
    op: Literal["relabel"] = "relabel"
    i: int
    label: int


PerturbOperation = Annotated[
    SwapLabels | DropTooth | JitterInstance | ErodeInstance | Relabel, Field(discriminator="op")
]


class PerturbSpec(BaseModel):
    """Ordered prediction edits; ``i``/``j`` are instance ids of the source scan."""

    model_config = ConfigDict(extra="forbid", frozen=True)
    operations: list[PerturbOperation] = Field(default_factory=list)


@dataclass(frozen=True)
class ExpectedTooth:
    instance_id: int
    normalized_distance: float
    f1: float
    identified: bool


@dataclass(frozen=True)
class ExpectedDeltas:
    """Predicted per-tooth scores of the perturbed scan and their change from a perfect prediction."""

    teeth: tuple[ExpectedTooth, ...]

    @property
    def tla_sum_delta(self) -> float:
        return math.fsum(t.normalized_distance for t in self.teeth)

    @property
    def f1_sum_delta(self) -> float:
        return math.fsum(t.f1 - 1.0 for t in self.teeth)

    @property
    def identified_delta(self) -> int:
        return -sum(1 for t in self.teeth if not t.identified)

    def to_dict(self) -> dict:
        return {
            "tla_sum_delta": self.tla_sum_delta,
            "f1_sum_delta": self.f1_sum_delta,
            "identified_delta": self.identified_delta,
            "teeth": [
                {
                    "instance_id": t.instance_id,
                    "normalized_distance": t.normalized_distance,
                    "f1": t.f1,
                    "identified": t.identified,
                }
                for t in self.teeth
            ],
        }


@dataclass(frozen=True, eq=False)
class PerturbResult:
    mesh: TriMesh
    prediction: ScanAnnotation
    centroids: tuple[tuple[tuple[float, float, float], int], ...]
    expected: ExpectedDeltas

    def centroids_to_list(self) -> list[dict]:
        return [{"point": list(p), "label": lab} for p, lab in self.centroids]


def _require(present: dict[int, int], i: int, op: str) -> None:
    if i not in present:
        raise PerturbError(f"{op}: instance {i} does not exist in the prediction")


def perturb(
    scan: SynthScan,
    spec: PerturbSpec,
    seed: int = 0,
    size_definition: SizeDefinition | str = SizeDefinition.BOUNDING_SPHERE,
) -> PerturbResult:
    """Apply ``spec`` to a perfect prediction of ``scan`` and derive the scores it must receive.

    The returned centroid channel reflects jitter displacements; the
    prediction annotation reflects drops, erosions and label edits.
    """
    mesh, gt = scan.mesh, scan.annotation
    labels = np.array(gt.labels)
    instances = np.array(gt.instances)
    present: dict[int, int] = {int(i): int(lab) for i, lab in zip(scan.extras.instance_ids, scan.extras.labels)}
    shift: dict[int, np.ndarray] = {i: np.zeros(3) for i in present}

    for step, operation in enumerate(spec.operations):
        match operation:
            case SwapLabels(i=i, j=j):
                _require(present, i, "swap_labels")
                _require(present, j, "swap_labels")
                if i == j:
                    raise PerturbError("swap_labels: i and j must differ")
                present[i], present[j] = present[j], present[i]
            case DropTooth(i=i):
                _require(present, i, "drop_tooth")
                members = instances == i
                labels[members] = GINGIVA
                instances[members] = 0
                del present[i]
            case JitterInstance(i=i, displacement=d, direction=direction):
                _require(present, i, "jitter_instance")
                if direction is None:
                    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(step,))))
                    unit = rng.normal(size=3)
                else:
                    unit = np.asarray(direction, dtype=np.float64)
                norm = float(np.linalg.norm(unit))
                if norm == 0.0:
                    raise PerturbError("jitter_instance: direction must be nonzero")
                shift[i] = shift[i] + d * unit / norm
            case ErodeInstance(i=i, fraction=fraction):
                _require(present, i, "erode_instance")
                members = np.flatnonzero(instances == i)
                removed = int(math.floor(fraction * members.size))
                if removed:
                    centroid = mesh.vertices[members].mean(axis=0)
                    distance = np.linalg.norm(mesh.vertices[members] - centroid, axis=1)
                    order = np.lexsort((members, -distance))
                    gone = members[order[:removed]]
                    labels[gone] = GINGIVA
                    instances[gone] = 0
            case Relabel(i=i, label=label):
                _require(present, i, "relabel")
                if not is_valid_fdi(label):
                    raise PerturbError(f"relabel: {label} is not an FDI tooth code")
                present[i] = label

    for i, label in present.items():
        labels[instances == i] = label
    prediction = gt.replace(labels=labels, instances=instances)

    channel: list[tuple[tuple[float, float, float], int]] = []
    for i in sorted(present):
        point = mesh.vertices[instances == i].mean(axis=0) + shift[i]
        channel.append(((float(point[0]), float(point[1]), float(point[2])), present[i]))

    expected = []
    points = np.asarray([p for p, _ in channel], dtype=np.float64).reshape(-1, 3)
    for i, label in zip(scan.extras.instance_ids.tolist(), scan.extras.labels.tolist()):
        members = gt.instances == i
        centroid = mesh.vertices[members].mean(axis=0)
        size = tooth_size(mesh.vertices[members], centroid, size_definition)
        if len(points):
            distance = np.linalg.norm(points - centroid, axis=1)
            nearest = int(np.argmin(distance))
            normalized = float(distance[nearest]) / size
            identified = float(distance[nearest]) < size / 2.0 and channel[nearest][1] == label
        else:
            normalized, identified = MISSING_PENALTY, False
        recall = int(np.count_nonzero(instances == i)) / int(np.count_nonzero(members))
        score = 2.0 * recall / (1.0 + recall) if recall > 0 else 0.0
        expected.append(ExpectedTooth(i, normalized, score, identified))

    logger.debug("perturb scan=%s operations=%d remaining=%d", scan.stem, len(spec.operations), len(present))
    return PerturbResult(mesh, prediction, tuple(channel), ExpectedDeltas(tuple(expected)))
