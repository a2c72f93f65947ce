"""teethseg-bench - evaluation and processing toolkit for 3D intra-oral scan tooth segmentation."""

try:
    from importlib.metadata import version

    __version__ = version("teethseg-bench")
except Exception:
    __version__ = "0.0.0.dev0"

from .config import RunConfig, load_config
from .diagnostics import Diagnostic, Diagnostics, Severity
from .errors import TeethSegError
from .fdi import Jaw, arch_sequence, class7_to_fdi, fdi_to_class7, is_valid_fdi
from .mesh_io import parse_annotation, parse_obj, write_annotation, write_obj
from .mesh_types import ScanAnnotation, SizeDefinition, ToothInstance, TriMesh
from .metrics import EvalReport, ScanEvalPartial, ToothRecord, aggregate, evaluate_scan, f1, global_score
from .preprocess import CleanupReport, RigidTransform, clean_mesh, pose_normalize
from .synthgen import PerturbSpec, SynthConfig, SynthScan, generate_jaw, perturb
from .uvflatten import SubMesh, UVChart, backproject_polygon, crop_sphere, harmonic_flatten
from .validators import extract_instances, validate_scan

__all__ = [
    "TriMesh",
    "ScanAnnotation",
    "ToothInstance",
    "SizeDefinition",
    "Jaw",
    "Diagnostic",
    "Diagnostics",
    "Severity",
    "TeethSegError",
    "RunConfig",
    "load_config",
    "parse_obj",
    "write_obj",
    "parse_annotation",
    "write_annotation",
    "is_valid_fdi",
    "arch_sequence",
    "fdi_to_class7",
    "class7_to_fdi",
    "extract_instances",
    "validate_scan",
    "CleanupReport",
    "RigidTransform",
    "clean_mesh",
    "pose_normalize",
    "SubMesh",
    "UVChart",
    "crop_sphere",
    "harmonic_flatten",
    "backproject_polygon",
    "ToothRecord",
    "ScanEvalPartial",
    "EvalReport",
    "evaluate_scan",
    "aggregate",
    "f1",
    "global_score",
    "SynthConfig",
    "SynthScan",
    "PerturbSpec",
    "generate_jaw",
    "perturb",
]
