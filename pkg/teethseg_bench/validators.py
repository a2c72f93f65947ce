"""Annotation validation and tooth-instance extraction."""

from __future__ import annotations

import logging

import numpy as np

from . import diagnostics as diag
from .diagnostics import Diagnostics
from .fdi import GINGIVA, is_valid_fdi, jaw_of
from .mesh_types import ScanAnnotation, SizeDefinition, ToothInstance, TriMesh

logger = logging.getLogger(__name__)


def tooth_size(points: np.ndarray, centroid: np.ndarray, definition: SizeDefinition | str) -> float:
    """Diameter-like tooth size used to normalize distances."""
    if SizeDefinition(definition) is SizeDefinition.BBOX_DIAGONAL:
        return float(np.linalg.norm(points.max(axis=0) - points.min(axis=0)))
    return 2.0 * float(np.linalg.norm(points - centroid, axis=1).max())


def majority_label(labels: np.ndarray) -> int:
    """Most frequent nonzero label, smaller code on ties; 0 when all are gingiva."""
    nonzero = labels[labels != GINGIVA]
    if nonzero.size == 0:
        return GINGIVA
    values, counts = np.unique(nonzero, return_counts=True)
    # np.unique is sorted, argmax returns the first maximum
    return int(values[int(np.argmax(counts))])


def extract_instances_with_diagnostics(
    mesh: TriMesh,
    annotation: ScanAnnotation,
    size_definition: SizeDefinition | str = SizeDefinition.BOUNDING_SPHERE,
) -> tuple[list[ToothInstance], Diagnostics]:
    if annotation.vertex_count != mesh.vertex_count:
        raise ValueError(
            f"annotation has {annotation.vertex_count} entries, mesh has {mesh.vertex_count} vertices"
        )
    found: list[diag.Diagnostic] = []
    teeth: list[ToothInstance] = []
    ids = annotation.instances
    members_of = _group_members(ids)
    for instance_id, members in members_of:
        labels = annotation.labels[members]
        label = majority_label(labels)
        if label == GINGIVA:
            found.append(
                diag.warning("gingiva-instance", f"instance {instance_id} has only gingiva labels", instance_id)
            )
        elif np.any(labels != label):
            distinct = sorted(int(v) for v in np.unique(labels))
            found.append(
                diag.warning(
                    "non-uniform-instance",
                    f"instance {instance_id} spans labels {distinct}, using {label}",
                    instance_id,
                )
            )
        points = mesh.vertices[members]
        centroid = points.mean(axis=0)
        size = tooth_size(points, centroid, size_definition)
        if size == 0.0:
            found.append(diag.warning("zero-size-instance", f"instance {instance_id} has zero extent", instance_id))
        teeth.append(ToothInstance(instance_id, label, members, centroid, size))
    return teeth, Diagnostics.of(found)


def extract_instances(
    mesh: TriMesh,
    annotation: ScanAnnotation,
    size_definition: SizeDefinition | str = SizeDefinition.BOUNDING_SPHERE,
) -> list[ToothInstance]:
    """One :class:`ToothInstance` per nonzero instance id, sorted by id."""
    return extract_instances_with_diagnostics(mesh, annotation, size_definition)[0]


def _group_members(ids: np.ndarray) -> list[tuple[int, np.ndarray]]:
    order = np.argsort(ids, kind="stable")
    sorted_ids = ids[order]
    values, starts = np.unique(sorted_ids, return_index=True)
    bounds = list(starts[1:]) + [len(sorted_ids)]
    return [
        (int(value), np.sort(order[start:stop]))
        for value, start, stop in zip(values, starts, bounds)
        if value != 0
    ]


def validate_scan(mesh: TriMesh, annotation: ScanAnnotation) -> Diagnostics:
    """Report every inconsistency between a mesh and its annotation. Never raises."""
    found: list[diag.Diagnostic] = []
    n = mesh.vertex_count
    if annotation.vertex_count != n:
        found.append(
            diag.error(
                "length-mismatch",
                f"annotation has {annotation.vertex_count} entries, mesh has {n} vertices",
            )
        )
        return Diagnostics.of(found)

    labels = annotation.labels
    seen: set[int] = set()
    for index, label in enumerate(labels.tolist()):
        if label == GINGIVA or label in seen:
            continue
        seen.add(label)
        if not is_valid_fdi(label):
            found.append(diag.error("invalid-fdi", f"label {label} is not a valid FDI code", index))
        elif jaw_of(label) is not annotation.jaw:
            found.append(
                diag.warning(
                    "quadrant-mismatch",
                    f"label {label} belongs to the {jaw_of(label)} jaw, scan is {annotation.jaw.value}",
                    index,
                )
            )

    zero_mismatch = np.flatnonzero((labels == 0) != (annotation.instances == 0))
    if zero_mismatch.size:
        found.append(
            diag.warning(
                "gingiva-mismatch",
                f"{zero_mismatch.size} vertices have gingiva label xor gingiva instance",
                int(zero_mismatch[0]),
            )
        )

    label_owner: dict[int, int] = {}
    for instance_id, members in _group_members(annotation.instances):
        member_labels = labels[members]
        label = majority_label(member_labels)
        if np.any(member_labels != member_labels[0]):
            distinct = sorted(int(v) for v in np.unique(member_labels))
            found.append(
                diag.warning(
                    "non-uniform-instance", f"instance {instance_id} spans labels {distinct}", instance_id
                )
            )
        if label != GINGIVA:
            if label in label_owner:
                found.append(
                    diag.warning(
                        "duplicate-label",
                        f"label {label} used by instances {label_owner[label]} and {instance_id}",
                        instance_id,
                    )
                )
            else:
                label_owner[label] = instance_id

    referenced = np.zeros(n, dtype=bool)
    referenced[mesh.faces.reshape(-1)] = True
    unreferenced = np.flatnonzero(~referenced)
    if unreferenced.size:
        found.append(
            diag.warning(
                "unreferenced-vertices",
                f"{unreferenced.size} vertices are not used by any face",
                int(unreferenced[0]),
            )
        )

    result = Diagnostics.of(found)
    logger.debug("scan_validated vertices=%d diagnostics=%d", n, len(result))
    return result
