"""Exception hierarchy for teethseg-bench.

Every domain failure derives from :class:`TeethSegError`, which is a
``ValueError`` so callers that only guard against bad input keep working.
The ``code`` attribute is stable and is what the CLI prints.
"""

from __future__ import annotations


class TeethSegError(ValueError):
    """Base class for all domain errors."""

    code = "error"

    def to_dict(self) -> dict:
        return {"severity": "error", "code": self.code, "message": str(self), "index": None}


class ObjParseError(TeethSegError):
    """Malformed Wavefront OBJ input."""

    code = "obj-parse"

    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)

    def to_dict(self) -> dict:
        result = super().to_dict()
        result["index"] = self.line
        return result


class AnnotationError(TeethSegError):
    """Malformed annotation JSON (missing key, wrong length, bad entries)."""

    code = "annotation"


class DegenerateGeometryError(TeethSegError):
    """Geometry too degenerate for the requested operation."""

    code = "degenerate-geometry"


class EmptySelectionError(TeethSegError):
    code = "empty-selection"


class NotADiskError(TeethSegError):
    """Sub-mesh is not a topological disk."""

    code = "not-a-disk"


class NumericalFailureError(TeethSegError):
    """Iterative solver did not reach the requested residual."""

    code = "numerical-failure"

    def __init__(self, message: str, residual: float) -> None:
        self.residual = residual
        super().__init__(f"{message} (residual={residual:.3e})")


class InvalidPolygonError(TeethSegError):
    code = "invalid-polygon"


class EvaluationError(TeethSegError):
    code = "evaluation"


class EmptyEvaluationError(EvaluationError):
    code = "empty-evaluation"


class NoAnchorError(TeethSegError):
    """Label field has no labeled face to propagate from."""

    code = "no-anchor"


class DegenerateFitError(TeethSegError):
    code = "degenerate-fit"


class TooManyTeethError(TeethSegError):
    code = "too-many-teeth"


class UnreachableRegionError(TeethSegError):
    """Graph component without any seed."""

    code = "unreachable-region"


class SynthConfigError(TeethSegError):
    code = "synth-config"


class PerturbError(TeethSegError):
    code = "perturb"


class LossInputError(TeethSegError):
    code = "loss-input"


class InputError(TeethSegError):
    """A command input file that does not have the expected shape."""

    code = "invalid-input"
