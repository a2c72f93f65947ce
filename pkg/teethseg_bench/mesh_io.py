"""Wavefront OBJ and challenge JSON readers/writers.

Only the OBJ subset used by the challenge scans is honored: ``v``, ``vn``
and ``f`` records. Texture coordinates, groups, materials and smoothing
statements are skipped. Polygon faces are fan-triangulated.
"""

from __future__ import annotations

import json
import logging
from typing import Any

import numpy as np

from . import diagnostics as diag
from .diagnostics import Diagnostics
from .errors import AnnotationError, ObjParseError
from .fdi import Jaw, is_valid_fdi
from .mesh_types import ScanAnnotation, TriMesh

logger = logging.getLogger(__name__)

ANNOTATION_KEYS = ("id_patient", "jaw", "labels", "instances")
_NORMAL_TOLERANCE = 1e-9


def _text(data: bytes | str) -> str:
    if isinstance(data, bytes):
        try:
            return data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ObjParseError(f"input is not UTF-8 text ({exc.reason})") from None
    return data


def _floats(tokens: list[str], lineno: int, record: str) -> list[float]:
    if len(tokens) < 3:
        raise ObjParseError(f"'{record}' record needs 3 coordinates, got {len(tokens)}", lineno)
    try:
        return [float(t) for t in tokens[:3]]
    except ValueError:
        bad = next(t for t in tokens[:3] if not _is_float(t))
        raise ObjParseError(f"malformed number {bad!r} in '{record}' record", lineno) from None


def _is_float(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def _vertex_ref(token: str, vertex_count: int, lineno: int) -> int:
    head = token.split("/", 1)[0]
    try:
        index = int(head)
    except ValueError:
        raise ObjParseError(f"malformed face index {token!r}", lineno) from None
    if index == 0:
        raise ObjParseError("face index 0 is not valid in OBJ (indices are 1-based)", lineno)
    if index < 0:
        # relative to the vertices read so far
        index = vertex_count + index + 1
        if index < 1:
            raise ObjParseError(f"relative face index {token!r} points before the first vertex", lineno)
    return index - 1


def parse_obj(data: bytes | str) -> TriMesh:
    """Parse OBJ text into a :class:`TriMesh`.

    Raises :class:`ObjParseError` naming the offending line for malformed
    numbers and out-of-range face indices.
    """
    vertices: list[list[float]] = []
    normals: list[list[float]] = []
    faces: list[tuple[int, int, int]] = []
    face_lines: list[int] = []

    for lineno, raw in enumerate(_text(data).splitlines(), start=1):
        tokens = raw.split()
        if not tokens or tokens[0].startswith("#"):
            continue
        record = tokens[0]
        if record == "v":
            vertices.append(_floats(tokens[1:], lineno, "v"))
        elif record == "vn":
            normals.append(_floats(tokens[1:], lineno, "vn"))
        elif record == "f":
            refs = [_vertex_ref(t, len(vertices), lineno) for t in tokens[1:]]
            if len(refs) < 3:
                raise ObjParseError(f"face needs at least 3 vertices, got {len(refs)}", lineno)
            for i in range(1, len(refs) - 1):
                faces.append((refs[0], refs[i], refs[i + 1]))
                face_lines.append(lineno)

    n = len(vertices)
    for face, lineno in zip(faces, face_lines):
        for index in face:
            if index >= n:
                raise ObjParseError(f"face index {index + 1} out of range ({n} vertices)", lineno)

    normal_array = None
    if normals:
        if len(normals) != n:
            logger.warning("obj_normals_dropped normals=%d vertices=%d", len(normals), n)
        else:
            normal_array = np.asarray(normals, dtype=np.float64)
            lengths = np.linalg.norm(normal_array, axis=1)
            if np.any(lengths == 0):
                logger.warning("obj_normals_dropped reason=zero-length count=%d", int(np.sum(lengths == 0)))
                normal_array = None
            else:
                off = np.abs(lengths - 1.0) > _NORMAL_TOLERANCE
                normal_array[off] /= lengths[off, None]

    logger.debug("obj_parsed vertices=%d faces=%d normals=%s", n, len(faces), normal_array is not None)
    return TriMesh(
        np.asarray(vertices, dtype=np.float64).reshape(-1, 3),
        np.asarray(faces, dtype=np.int64).reshape(-1, 3),
        normal_array,
    )


def write_obj(mesh: TriMesh, comment: str = "teethseg-bench") -> bytes:
    """Serialize a mesh; coordinates use the shortest repr that reparses bit-exactly."""
    lines = [f"# {comment}"]
    lines.extend(f"v {x!r} {y!r} {z!r}" for x, y, z in mesh.vertices.tolist())
    if mesh.normals is not None:
        lines.extend(f"vn {x!r} {y!r} {z!r}" for x, y, z in mesh.normals.tolist())
    lines.extend(f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.faces.tolist())
    return ("\n".join(lines) + "\n").encode("utf-8")


_INT64 = np.iinfo(np.int64)


def _int_list(value: Any, key: str) -> list[int]:
    if not isinstance(value, list):
        raise AnnotationError(f"'{key}' must be an array of integers")
    for i, item in enumerate(value):
        if isinstance(item, bool) or not isinstance(item, int):
            raise AnnotationError(f"'{key}'[{i}] is not an integer: {item!r}")
        if not _INT64.min <= item <= _INT64.max:
            raise AnnotationError(f"'{key}'[{i}] is out of the 64-bit integer range: {item}")
    return value


def parse_annotation(data: bytes | str, vertex_count: int) -> ScanAnnotation:
    """Parse a challenge label file and check it against the mesh vertex count.

    Invalid FDI codes do not fail the parse; they are attached as
    diagnostics so malformed predictions remain scoreable.
    """
    try:
        obj = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise AnnotationError(f"annotation is not valid JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise AnnotationError("annotation must be a JSON object")
    for key in ANNOTATION_KEYS:
        if key not in obj:
            raise AnnotationError(f"missing key '{key}'")

    jaw = obj["jaw"]
    if jaw not in (Jaw.UPPER.value, Jaw.LOWER.value):
        raise AnnotationError(f"jaw must be 'upper' or 'lower', got {jaw!r}")
    labels = _int_list(obj["labels"], "labels")
    instances = _int_list(obj["instances"], "instances")
    for key, values in (("labels", labels), ("instances", instances)):
        if len(values) != vertex_count:
            raise AnnotationError(f"'{key}' has {len(values)} entries, mesh has {vertex_count} vertices")
    if any(i < 0 for i in instances):
        raise AnnotationError("'instances' must be non-negative")

    found: list[diag.Diagnostic] = []
    seen: set[int] = set()
    for index, label in enumerate(labels):
        if label != 0 and label not in seen and not is_valid_fdi(label):
            seen.add(label)
            found.append(diag.error("invalid-fdi", f"label {label} is not a valid FDI code", index))
    for key in sorted(set(obj) - set(ANNOTATION_KEYS)):
        found.append(diag.warning("unknown-key", f"ignored key '{key}'"))

    return ScanAnnotation(
        patient_id=str(obj["id_patient"]),
        jaw=Jaw(jaw),
        labels=np.asarray(labels, dtype=np.int64),
        instances=np.asarray(instances, dtype=np.int64),
        diagnostics=Diagnostics.of(found),
    )


def write_annotation(annotation: ScanAnnotation) -> bytes:
    """Serialize with key order id_patient, jaw, labels, instances."""
    obj = {
        "id_patient": annotation.patient_id,
        "jaw": annotation.jaw.value,
        "labels": annotation.labels.tolist(),
        "instances": annotation.instances.tolist(),
    }
    return json.dumps(obj).encode("utf-8")
