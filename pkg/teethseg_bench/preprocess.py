"""Mesh cleanup and PCA pose normalization to the occlusal plane."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import StrEnum

import numpy as np
from scipy.spatial import cKDTree

from . import diagnostics as diag
from .diagnostics import EMPTY, Diagnostics
from .errors import DegenerateGeometryError
from .mesh_types import ScanAnnotation, TriMesh

logger = logging.getLogger(__name__)

ZERO_AREA = 1e-12
_RANK_TOLERANCE = 1e-12


@dataclass(frozen=True)
class CleanupReport:
    """What :func:`clean_mesh` removed. ``index_map[old]`` is the new index or -1."""

    removed_degenerate_faces: int = 0
    removed_duplicate_faces: int = 0
    merged_duplicate_vertices: int = 0
    removed_unreferenced_vertices: int = 0
    index_map: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    diagnostics: Diagnostics = EMPTY

    @property
    def changed(self) -> bool:
        return bool(
            self.removed_degenerate_faces
            or self.removed_duplicate_faces
            or self.merged_duplicate_vertices
            or self.removed_unreferenced_vertices
        )

    def to_dict(self) -> dict:
        return {
            "removed_degenerate_faces": self.removed_degenerate_faces,
            "removed_duplicate_faces": self.removed_duplicate_faces,
            "merged_duplicate_vertices": self.merged_duplicate_vertices,
            "removed_unreferenced_vertices": self.removed_unreferenced_vertices,
            "index_map": [None if i < 0 else i for i in self.index_map.tolist()],
            "diagnostics": self.diagnostics.to_list(),
        }


def _degenerate(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    if len(faces) == 0:
        return np.zeros(0, dtype=bool)
    repeated = (faces[:, 0] == faces[:, 1]) | (faces[:, 1] == faces[:, 2]) | (faces[:, 0] == faces[:, 2])
    p = vertices[faces]
    area = 0.5 * np.linalg.norm(np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1)
    return repeated | (area < ZERO_AREA)


def merge_representatives(vertices: np.ndarray, tolerance: float) -> np.ndarray:
    """For every vertex, the index of the first earlier vertex it merges into (itself if none).

    Greedy in input order: a vertex joins the smallest-index representative
    within ``tolerance``; representatives are pairwise farther apart than it.
    """
    n = len(vertices)
    rep = np.arange(n)
    if n < 2:
        return rep
    pairs = cKDTree(vertices).query_pairs(r=tolerance, output_type="ndarray")
    if len(pairs) == 0:
        return rep
    neighbors: dict[int, list[int]] = {}
    for i, j in pairs.tolist():
        lo, hi = (i, j) if i < j else (j, i)
        neighbors.setdefault(hi, []).append(lo)
    for i in range(n):
        earlier = neighbors.get(i)
        if not earlier:
            continue
        candidates = [j for j in earlier if rep[j] == j]
        if candidates:
            rep[i] = min(candidates)
    return rep


def _canonical_faces(faces: np.ndarray) -> np.ndarray:
    # rotate each triangle so its smallest index comes first, orientation kept
    shift = np.argmin(faces, axis=1)
    idx = (shift[:, None] + np.arange(3)[None, :]) % 3
    return np.take_along_axis(faces, idx, axis=1)


def clean_mesh(
    mesh: TriMesh,
    annotation: ScanAnnotation | None = None,
    vertex_merge_tolerance: float = 1e-6,
) -> tuple[TriMesh, ScanAnnotation | None, CleanupReport]:
    """Remove degenerate and duplicate faces, merge coincident vertices, drop unreferenced ones.

    Order: degenerate faces, duplicate vertices, degenerate faces again,
    duplicate faces, unreferenced vertices.
    """
    if vertex_merge_tolerance < 0:
        raise ValueError("vertex_merge_tolerance must be >= 0")
    if annotation is not None and annotation.vertex_count != mesh.vertex_count:
        raise ValueError(
            f"annotation has {annotation.vertex_count} entries, mesh has {mesh.vertex_count} vertices"
        )
    vertices = mesh.vertices
    faces = mesh.faces.copy()
    n = mesh.vertex_count

    bad = _degenerate(vertices, faces)
    removed_degenerate = int(bad.sum())
    faces = faces[~bad]

    rep = merge_representatives(vertices, vertex_merge_tolerance)
    merged = int(np.sum(rep != np.arange(n)))
    faces = rep[faces] if len(faces) else faces

    bad = _degenerate(vertices, faces)
    removed_degenerate += int(bad.sum())
    faces = faces[~bad]

    removed_duplicates = 0
    if len(faces):
        _, first = np.unique(_canonical_faces(faces), axis=0, return_index=True)
        keep = np.zeros(len(faces), dtype=bool)
        keep[first] = True
        removed_duplicates = int(len(faces) - keep.sum())
        faces = faces[keep]

    is_rep = rep == np.arange(n)
    referenced = np.zeros(n, dtype=bool)
    referenced[faces.reshape(-1)] = True
    kept = is_rep & referenced
    removed_unreferenced = int(np.sum(is_rep & ~referenced))

    new_index = np.full(n, -1, dtype=np.int64)
    new_index[kept] = np.arange(int(kept.sum()))
    index_map = new_index[rep]

    found: list[diag.Diagnostic] = []
    new_annotation = None
    if annotation is not None:
        conflicts = np.flatnonzero((rep != np.arange(n)) & (annotation.instances != annotation.instances[rep]))
        for old in conflicts.tolist():
            found.append(
                diag.warning(
                    "merge-conflict",
                    f"vertex {old} merged into {int(rep[old])} with a different instance id, keeping the first",
                    old,
                )
            )
        new_annotation = annotation.replace(
            labels=annotation.labels[kept],
            instances=annotation.instances[kept],
        )

    normals = mesh.normals[kept] if mesh.normals is not None else None
    cleaned = TriMesh(vertices[kept], new_index[faces] if len(faces) else faces, normals)
    report = CleanupReport(
        removed_degenerate_faces=removed_degenerate,
        removed_duplicate_faces=removed_duplicates,
        merged_duplicate_vertices=merged,
        removed_unreferenced_vertices=removed_unreferenced,
        index_map=index_map,
        diagnostics=Diagnostics.of(found),
    )
    logger.info(
        "clean_mesh degenerate=%d duplicate_faces=%d merged=%d unreferenced=%d vertices=%d faces=%d",
        removed_degenerate,
        removed_duplicates,
        merged,
        removed_unreferenced,
        cleaned.vertex_count,
        cleaned.face_count,
    )
    return cleaned, new_annotation, report


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """``x -> rotation @ x + translation``."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=np.float64).reshape(3, 3))
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=np.float64).reshape(3))

    @classmethod
    def identity(cls) -> RigidTransform:
        return cls(np.eye(3), np.zeros(3))

    def apply(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) @ self.rotation.T + self.translation

    def apply_to_mesh(self, mesh: TriMesh) -> TriMesh:
        normals = mesh.normals @ self.rotation.T if mesh.normals is not None else None
        return TriMesh(self.apply(mesh.vertices), mesh.faces, normals)

    def inverse(self) -> RigidTransform:
        rt = self.rotation.T
        return RigidTransform(rt, -rt @ self.translation)

    def to_dict(self) -> dict:
        return {"rotation": self.rotation.tolist(), "translation": self.translation.tolist()}


class PcaWeighting(StrEnum):
    VERTEX = "vertex"
    AREA = "area"


def _vertex_weights(mesh: TriMesh, weighting: PcaWeighting) -> np.ndarray:
    if weighting is PcaWeighting.VERTEX:
        return np.ones(mesh.vertex_count)
    weights = np.zeros(mesh.vertex_count)
    np.add.at(weights, mesh.faces.reshape(-1), np.repeat(mesh.face_areas() / 3.0, 3))
    return weights


def pose_normalize(
    mesh: TriMesh, weighting: PcaWeighting | str = PcaWeighting.VERTEX
) -> tuple[TriMesh, RigidTransform]:
    """Center the scan and rotate its principal axes onto x (largest), y and z (occlusal normal).

    Signs: z is flipped so the mean face normal points to +z, x so the
    vertex of largest |x| (first on ties) has positive x; y = z x x.
    """
    weighting = PcaWeighting(weighting)
    if mesh.vertex_count < 3:
        raise DegenerateGeometryError(f"pose normalization needs >= 3 vertices, got {mesh.vertex_count}")
    weights = _vertex_weights(mesh, weighting)
    total = float(weights.sum())
    if total <= 0:
        raise DegenerateGeometryError("all vertex weights are zero")
    center = weights @ mesh.vertices / total
    centered = mesh.vertices - center
    covariance = (centered * weights[:, None]).T @ centered / total
    eigenvalues, eigenvectors = np.linalg.eigh(covariance)
    eigenvalues = eigenvalues[::-1]
    eigenvectors = eigenvectors[:, ::-1]
    if eigenvalues[0] <= 0 or eigenvalues[1] <= _RANK_TOLERANCE * eigenvalues[0]:
        raise DegenerateGeometryError("vertex covariance is rank-deficient (coincident or collinear vertices)")

    x_axis = eigenvectors[:, 0]
    z_axis = eigenvectors[:, 2]
    mean_normal = mesh.face_normals().mean(axis=0) if mesh.face_count else np.zeros(3)
    if float(mean_normal @ z_axis) < 0:
        z_axis = -z_axis
    projected = centered @ x_axis
    extreme = int(np.argmax(np.abs(projected)))
    if projected[extreme] < 0:
        x_axis = -x_axis
    y_axis = np.cross(z_axis, x_axis)
    rotation = np.stack([x_axis, y_axis, z_axis])
    transform = RigidTransform(rotation, -rotation @ center)
    logger.debug("pose_normalize weighting=%s eigenvalues=%s", weighting.value, np.round(eigenvalues, 6).tolist())
    return transform.apply_to_mesh(mesh), transform
