"""Typed, immutable containers for scans, annotations and tooth instances."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import StrEnum

import numpy as np

from .diagnostics import EMPTY, Diagnostics
from .fdi import Jaw


def _frozen(array: np.ndarray) -> np.ndarray:
    array.flags.writeable = False
    return array


class SizeDefinition(StrEnum):
    """How the size of a tooth is measured."""

    BOUNDING_SPHERE = "bounding_sphere"  # 2 x max distance from centroid
    BBOX_DIAGONAL = "bbox_diagonal"


@dataclass(frozen=True, eq=False)
class TriMesh:
    """Triangle mesh: vertex coordinates in mm, 0-based faces, optional per-vertex unit normals."""

    vertices: np.ndarray
    faces: np.ndarray
    normals: np.ndarray | None = None

    def __post_init__(self) -> None:
        vertices = np.array(self.vertices, dtype=np.float64).reshape(-1, 3)
        faces = np.array(self.faces, dtype=np.int64).reshape(-1, 3)
        if faces.size and (faces.min() < 0 or faces.max() >= len(vertices)):
            raise ValueError(f"face index out of range for {len(vertices)} vertices")
        object.__setattr__(self, "vertices", _frozen(vertices))
        object.__setattr__(self, "faces", _frozen(faces))
        if self.normals is not None:
            normals = np.array(self.normals, dtype=np.float64).reshape(-1, 3)
            if len(normals) != len(vertices):
                raise ValueError(f"{len(normals)} normals for {len(vertices)} vertices")
            object.__setattr__(self, "normals", _frozen(normals))

    @property
    def vertex_count(self) -> int:
        return int(self.vertices.shape[0])

    @property
    def face_count(self) -> int:
        return int(self.faces.shape[0])

    def with_vertices(self, vertices: np.ndarray, normals: np.ndarray | None = None) -> TriMesh:
        return TriMesh(vertices, self.faces, normals if normals is not None else self.normals)

    def face_normals(self) -> np.ndarray:
        """Unit face normals; zero rows for zero-area faces."""
        v = self.vertices
        f = self.faces
        cross = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
        norm = np.linalg.norm(cross, axis=1)
        out = np.zeros_like(cross)
        nz = norm > 0
        out[nz] = cross[nz] / norm[nz, None]
        return out

    def face_areas(self) -> np.ndarray:
        v = self.vertices
        f = self.faces
        return 0.5 * np.linalg.norm(np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]]), axis=1)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TriMesh):
            return NotImplemented
        if (self.normals is None) != (other.normals is None):
            return False
        return (
            np.array_equal(self.vertices, other.vertices)
            and np.array_equal(self.faces, other.faces)
            and (self.normals is None or np.array_equal(self.normals, other.normals))
        )

    def __repr__(self) -> str:
        return f"TriMesh(vertices={self.vertex_count}, faces={self.face_count}, normals={self.normals is not None})"


@dataclass(frozen=True, eq=False)
class ScanAnnotation:
    """Per-vertex FDI labels and instance ids of one scan, as in the challenge JSON files."""

    patient_id: str
    jaw: Jaw
    labels: np.ndarray
    instances: np.ndarray
    diagnostics: Diagnostics = field(default=EMPTY)

    def __post_init__(self) -> None:
        labels = np.array(self.labels, dtype=np.int64).reshape(-1)
        instances = np.array(self.instances, dtype=np.int64).reshape(-1)
        if len(labels) != len(instances):
            raise ValueError(f"labels ({len(labels)}) and instances ({len(instances)}) differ in length")
        object.__setattr__(self, "jaw", Jaw(self.jaw))
        object.__setattr__(self, "labels", _frozen(labels))
        object.__setattr__(self, "instances", _frozen(instances))

    @property
    def vertex_count(self) -> int:
        return int(self.labels.shape[0])

    def replace(self, *, labels: np.ndarray | None = None, instances: np.ndarray | None = None) -> ScanAnnotation:
        return ScanAnnotation(
            patient_id=self.patient_id,
            jaw=self.jaw,
            labels=self.labels if labels is None else labels,
            instances=self.instances if instances is None else instances,
        )

    @property
    def stem(self) -> str:
        return f"{self.patient_id}_{self.jaw.value}"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ScanAnnotation):
            return NotImplemented
        return (
            self.patient_id == other.patient_id
            and self.jaw == other.jaw
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.instances, other.instances)
        )

    def __repr__(self) -> str:
        teeth = int(np.unique(self.instances[self.instances > 0]).size)
        return (
            f"ScanAnnotation(patient_id={self.patient_id!r}, jaw={self.jaw.value}, "
            f"vertices={self.vertex_count}, teeth={teeth})"
        )


@dataclass(frozen=True, eq=False)
class ToothInstance:
    """One annotated or predicted tooth.

    ``label`` is 0 when every member vertex carries the gingiva label; such
    instances, and single-point instances of zero size, are not scoreable.
    """

    instance_id: int
    label: int
    vertex_ids: np.ndarray
    centroid: np.ndarray
    size: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "vertex_ids", _frozen(np.array(self.vertex_ids, dtype=np.int64).reshape(-1)))
        object.__setattr__(self, "centroid", _frozen(np.array(self.centroid, dtype=np.float64).reshape(3)))

    @property
    def scoreable(self) -> bool:
        return self.label != 0 and self.size > 0

    def __repr__(self) -> str:
        c = ", ".join(f"{x:.3f}" for x in self.centroid)
        return (
            f"ToothInstance(id={self.instance_id}, label={self.label}, vertices={self.vertex_ids.size}, "
            f"centroid=({c}), size={self.size:.3f})"
        )
