"""Command-line interface: one subcommand per pipeline stage.

Exit codes: 0 success, 1 domain error (one JSON diagnostic per line on
stderr), 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
from pydantic import ValidationError

from . import __version__
from . import diagnostics as diag
from . import losses, postproc, reports
from .batch import evaluate_directory, pair_scans
from .config import RunConfig, load_config
from .diagnostics import Diagnostics
from .errors import InputError, TeethSegError
from .fdi import Jaw
from .geometry import max_curvature
from .mesh_io import parse_annotation, parse_obj, write_annotation, write_obj
from .metrics import leaderboard_csv, leaderboard_row
from .monitoring import RunStatsRecorder
from .preprocess import clean_mesh, pose_normalize
from .synthgen import PerturbSpec, SynthConfig, generate_dataset, perturb, write_scans
from .uvflatten import (
    SubMesh,
    backproject_polygon,
    chart_from_dict,
    chart_to_dict,
    crop_sphere,
    crop_tooth,
    flipped_triangles,
    harmonic_flatten,
)
from .validators import extract_instances, validate_scan

logger = logging.getLogger(__name__)

_usage_path = Path(__file__).parent / "cli_usage.md"
try:
    _usage = _usage_path.read_text(encoding="utf-8")
except FileNotFoundError:
    _usage = "Run `teethseg-bench <command> --help` for the options of each command."


class UsageError(Exception):
    """Bad invocation or configuration; exit code 2."""


Handler = Callable[[argparse.Namespace, RunConfig], int]


# ---------------------------------------------------------------------------
# I/O helpers
# ---------------------------------------------------------------------------


def _read_json(path: str | Path) -> Any:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from None


def _read_array(path: str | Path, dtype: type = np.float64) -> np.ndarray:
    """Numeric array from ``.json``, headerless ``.csv`` or ``.npy``."""
    p = Path(path)
    if p.suffix == ".npy":
        return np.load(p).astype(dtype)
    if p.suffix == ".csv":
        return pd.read_csv(p, header=None).to_numpy(dtype=dtype)
    try:
        return np.asarray(_read_json(p), dtype=dtype)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{path} does not hold a numeric array: {exc}") from None


def _read_mesh(path: str | Path):
    return parse_obj(Path(path).read_bytes())


def _read_annotation(path: str | Path, vertex_count: int):
    return parse_annotation(Path(path).read_bytes(), vertex_count)


def _emit_diagnostics(diagnostics: Diagnostics) -> None:
    for d in diagnostics:
        print(json.dumps(d.to_dict(), sort_keys=True), file=sys.stderr)


def _emit(args: argparse.Namespace, config: RunConfig, result: Any, text: str | None = None) -> None:
    """Write ``result`` to ``--out`` when given; print it unless it went to a file in human mode."""
    out = getattr(args, "out", None)
    if out:
        Path(out).write_text(json.dumps(result) + "\n")
    if args.json:
        sys.stdout.write(reports.dumps(reports.document(config, command=args.command, result=result)))
    elif text is not None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    elif not out:
        sys.stdout.write(json.dumps(result) + "\n")


def _as_list(values: np.ndarray) -> list:
    return np.asarray(values).tolist()


# ---------------------------------------------------------------------------
# mesh_core / preprocess
# ---------------------------------------------------------------------------


def cmd_validate(args: argparse.Namespace, config: RunConfig) -> int:
    mesh = _read_mesh(args.mesh)
    annotation = _read_annotation(args.annotation, mesh.vertex_count)
    found = annotation.diagnostics.merge(validate_scan(mesh, annotation))
    scan_id = annotation.stem
    if args.json:
        sys.stdout.write(reports.dumps(reports.document(config, scan_id=scan_id, diagnostics=found.to_list())))
    else:
        sys.stdout.write(reports.render_validation(scan_id, mesh, annotation, found))
    return 1 if found.has_errors else 0


def cmd_clean(args: argparse.Namespace, config: RunConfig) -> int:
    if args.annotation and not args.out_annotation:
        raise UsageError("--out-annotation is required when --annotation is given")
    mesh = _read_mesh(args.mesh)
    annotation = _read_annotation(args.annotation, mesh.vertex_count) if args.annotation else None
    cleaned, new_annotation, report = clean_mesh(mesh, annotation, config.vertex_merge_tolerance)
    Path(args.out_mesh).write_bytes(write_obj(cleaned))
    if new_annotation is not None:
        Path(args.out_annotation).write_bytes(write_annotation(new_annotation))
    if args.json:
        sys.stdout.write(reports.dumps(reports.document(config, cleanup=report.to_dict())))
    else:
        sys.stdout.write(reports.render_cleanup(Path(args.mesh).stem, report))
    return 0


def cmd_normalize(args: argparse.Namespace, config: RunConfig) -> int:
    mesh = _read_mesh(args.mesh)
    normalized, transform = pose_normalize(mesh, config.pca_weighting)
    Path(args.out_mesh).write_bytes(write_obj(normalized))
    if args.transform_out:
        Path(args.transform_out).write_text(json.dumps(transform.to_dict()) + "\n")
    if args.json:
        sys.stdout.write(reports.dumps(reports.document(config, transform=transform.to_dict())))
    else:
        rotation = "\n".join("  " + " ".join(f"{x: .6f}" for x in row) for row in transform.rotation.tolist())
        translation = " ".join(f"{x:.6f}" for x in transform.translation.tolist())
        sys.stdout.write(f"rotation:\n{rotation}\ntranslation: {translation}\n")
    return 0


# ---------------------------------------------------------------------------
# uvflatten
# ---------------------------------------------------------------------------


def cmd_flatten(args: argparse.Namespace, config: RunConfig) -> int:
    mesh = _read_mesh(args.mesh)
    if args.instance is not None:
        if not args.annotation:
            raise UsageError("--instance requires --annotation")
        annotation = _read_annotation(args.annotation, mesh.vertex_count)
        teeth = {t.instance_id: t for t in extract_instances(mesh, annotation, config.size_definition)}
        if args.instance not in teeth:
            raise InputError(f"instance {args.instance} does not exist")
        sub = crop_tooth(mesh, teeth[args.instance], config.crop_radius_factor)
    elif args.center is not None:
        if args.radius is None:
            raise UsageError("--center requires --radius")
        sub = crop_sphere(mesh, np.asarray(args.center, dtype=np.float64), args.radius)
    else:
        sub = SubMesh.whole(mesh)
    chart = harmonic_flatten(sub, config.flatten_weights, config.solver_tolerance, config.solver_max_iter_factor)
    curvature, found = max_curvature(sub.mesh)
    Path(args.out).write_text(json.dumps(chart_to_dict(sub, chart, curvature)) + "\n")
    _emit_diagnostics(found)
    flipped = int(flipped_triangles(chart, sub.mesh.faces).size)
    summary = {
        "vertices": sub.mesh.vertex_count,
        "faces": sub.mesh.face_count,
        "boundary_vertices": int(chart.boundary_loop.size),
        "residual": chart.residual,
        "flipped_triangles": flipped,
    }
    if args.json:
        sys.stdout.write(reports.dumps(reports.document(config, chart=summary)))
    else:
        sys.stdout.write(
            f"chart {args.out}: {summary['vertices']} vertices, {summary['boundary_vertices']} on the boundary, "
            f"residual {chart.residual:.3e}, {flipped} flipped triangles\n"
        )
    return 0


def cmd_backproject(args: argparse.Namespace, config: RunConfig) -> int:
    data = _read_json(args.chart)
    if not isinstance(data, dict):
        raise InputError(f"{args.chart} must hold a chart object")
    sub, chart = chart_from_dict(data)
    selected = _as_list(backproject_polygon(sub, chart, _read_json(args.polygon)))
    _emit(args, config, selected)
    return 0


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


def cmd_evaluate(args: argparse.Namespace, config: RunConfig) -> int:
    if args.pred_dir is None and args.pairs is None:
        raise UsageError("evaluate needs --pred-dir or --pairs")
    pairs, found = pair_scans(args.gt_dir, args.pred_dir, args.pairs)
    report = evaluate_directory(pairs, config)
    scan_diagnostics = found.merge(*(p.diagnostics for p in report.per_scan))
    _emit_diagnostics(scan_diagnostics)
    document = reports.evaluation_document(report, config, found, team=args.team)
    if args.out:
        Path(args.out).write_text(reports.dumps(document))
    if args.csv:
        Path(args.csv).write_text(leaderboard_csv(leaderboard_row(report, args.team)))
    if args.json:
        sys.stdout.write(reports.dumps(document))
    else:
        sys.stdout.write(reports.render_evaluation(report, found))
        sys.stdout.write("\n" + leaderboard_csv(leaderboard_row(report, args.team)))
    return 0


# ---------------------------------------------------------------------------
# synthgen
# ---------------------------------------------------------------------------


def _synth_config(args: argparse.Namespace) -> SynthConfig:
    values: dict[str, Any] = {}
    if args.synth_config:
        data = _read_json(args.synth_config)
        if not isinstance(data, dict):
            raise UsageError(f"{args.synth_config} must hold a JSON object")
        values.update(data)
    for key in ("seed", "jaw", "tooth_count", "patient_id"):
        if getattr(args, key) is not None:
            values[key] = getattr(args, key)
    try:
        return SynthConfig.model_validate(values)
    except ValidationError as exc:
        raise UsageError(f"invalid synthetic config: {exc}") from None


def cmd_synth(args: argparse.Namespace, config: RunConfig) -> int:
    synth = _synth_config(args)
    scans = generate_dataset(synth, args.count)
    written = write_scans(scans, args.out)
    result: dict[str, Any] = {"scans": [s.stem for s in scans], "files": [str(p) for p in written]}
    if args.perturb:
        if not args.pred_out:
            raise UsageError("--perturb requires --pred-out")
        try:
            spec = PerturbSpec.model_validate(_read_json(args.perturb))
        except ValidationError as exc:
            raise UsageError(f"invalid perturbation spec: {exc}") from None
        pred_dir = Path(args.pred_out)
        pred_dir.mkdir(parents=True, exist_ok=True)
        expected = {}
        for scan in scans:
            outcome = perturb(scan, spec, args.perturb_seed, config.size_definition)
            (pred_dir / f"{scan.stem}.json").write_bytes(write_annotation(outcome.prediction))
            (pred_dir / f"{scan.stem}.centroids.json").write_text(json.dumps(outcome.centroids_to_list()) + "\n")
            expected[scan.stem] = outcome.expected.to_dict()
        (pred_dir / "expected.json").write_text(json.dumps(expected, sort_keys=True) + "\n")
        result["predictions"] = str(pred_dir)
    if args.json:
        sys.stdout.write(reports.dumps(reports.document(config, synth=synth.model_dump(mode="json"), **result)))
    else:
        sys.stdout.write(f"wrote {len(scans)} scan(s) to {args.out}\n")
    return 0


# ---------------------------------------------------------------------------
# postproc
# ---------------------------------------------------------------------------


def _pp_island_removal(args: argparse.Namespace, config: RunConfig) -> Any:
    mesh = _read_mesh(args.mesh)
    return _as_list(postproc.island_removal(mesh, _read_array(args.labels, np.int64), config.island_min_faces))


def _pp_closing(args: argparse.Namespace, config: RunConfig) -> Any:
    mesh = _read_mesh(args.mesh)
    return _as_list(postproc.label_closing(mesh, _read_array(args.labels, np.int64), config.closing_iterations))


def _pp_vote_fusion(args: argparse.Namespace, config: RunConfig) -> Any:
    hits = _read_json(args.hits)
    return _as_list(postproc.majority_vote_fusion([[(int(lab), float(w)) for lab, w in face] for face in hits]))


def _pp_dbscan(args: argparse.Namespace, config: RunConfig) -> Any:
    return _as_list(postproc.dbscan(_read_array(args.points), config.dbscan_eps, config.dbscan_min_pts))


def _pp_density_peaks(args: argparse.Namespace, config: RunConfig) -> Any:
    centers, assignment = postproc.density_peaks(_read_array(args.points), config.density_cutoff, args.k)
    return {"centers": _as_list(centers), "assignment": _as_list(assignment)}


def _pp_offset_cluster(args: argparse.Namespace, config: RunConfig) -> Any:
    ids = postproc.offset_shift_cluster(
        _read_array(args.points),
        _read_array(args.offsets),
        _read_array(args.gingiva_mask, np.int64).astype(bool),
        config.dbscan_eps,
        config.dbscan_min_pts,
    )
    return _as_list(ids)


def _pp_cluster_centroids(args: argparse.Namespace, config: RunConfig) -> Any:
    return _as_list(
        postproc.cluster_centroids(
            _read_array(args.points), config.dbscan_eps, config.dbscan_min_pts, keep_noise=not args.drop_noise
        )
    )


def _pp_fps(args: argparse.Namespace, config: RunConfig) -> Any:
    return _as_list(postproc.farthest_point_sampling(_read_array(args.points), args.n, config.fps_seed_index))


def _pp_boundary_sample(args: argparse.Namespace, config: RunConfig) -> Any:
    return _as_list(
        postproc.boundary_aware_sample(
            _read_array(args.points),
            _read_array(args.ids, np.int64),
            config.boundary_k,
            args.n_extra,
            config.fps_seed_index,
        )
    )


def _pp_grid(args: argparse.Namespace, config: RunConfig) -> Any:
    return _as_list(postproc.grid_subsample(_read_array(args.points), config.grid_cell_size))


def _pp_patch_crop(args: argparse.Namespace, config: RunConfig) -> Any:
    indices, weights = postproc.patch_crop(
        _read_array(args.points), np.asarray(args.center, dtype=np.float64), args.patch_size
    )
    return {"indices": _as_list(indices), "weights": _as_list(weights)}


def _pp_crop_radius(args: argparse.Namespace, config: RunConfig) -> Any:
    return _as_list(postproc.crop_radius_from_spacing(_read_array(args.centroids), config.crop_radius_factor))


def _pp_knn(args: argparse.Namespace, config: RunConfig) -> Any:
    dtype = np.int64 if args.mode == "vote" else np.float64
    return _as_list(
        postproc.knn_label_interpolate(
            _read_array(args.points), _read_array(args.values, dtype), _read_array(args.query), config.knn_k, args.mode
        )
    )


def _read_proposals(path: str) -> list[postproc.Proposal]:
    data = _read_json(path)
    if not isinstance(data, list):
        raise InputError(f"{path} must hold a JSON array of proposals")
    try:
        return [postproc.Proposal.from_dict(item) for item in data]
    except (KeyError, TypeError) as exc:
        raise InputError(f"{path}: malformed proposal ({exc})") from None


def _pp_merge_proposals(args: argparse.Namespace, config: RunConfig) -> Any:
    merged = postproc.merge_proposals(_read_proposals(args.proposals), config.iou_threshold)
    return [p.to_dict() for p in merged]


def _pp_assign_proposals(args: argparse.Namespace, config: RunConfig) -> Any:
    proposals = _read_proposals(args.proposals)
    labels, instances = postproc.assign_proposal_labels(
        args.n_points, proposals, _as_list(_read_array(args.labels, np.int64))
    )
    return {"labels": _as_list(labels), "instances": _as_list(instances)}


def _pp_arch_correct(args: argparse.Namespace, config: RunConfig) -> Any:
    data = _read_json(args.teeth)
    try:
        teeth = [(item["centroid"], int(item["label"])) for item in data]
    except (KeyError, TypeError) as exc:
        raise InputError(f"{args.teeth}: malformed tooth entry ({exc})") from None
    curve = postproc.fit_arch_curve(np.asarray([c for c, _ in teeth], dtype=np.float64))
    return {"labels": postproc.arch_label_correct(teeth, curve, args.jaw), "curve": curve.to_dict()}


def _pp_walker(args: argparse.Namespace, config: RunConfig) -> Any:
    mesh = _read_mesh(args.mesh)
    raw = _read_json(args.seeds)
    items = raw.items() if isinstance(raw, dict) else raw
    try:
        seeds = {int(v): int(label) for v, label in items}
    except (TypeError, ValueError) as exc:
        raise InputError(f"{args.seeds}: seeds must map vertex -> label ({exc})") from None
    result = postproc.random_walker(
        mesh,
        seeds,
        beta=config.walker_beta,
        tolerance=config.walker_tolerance,
        max_iter_factor=config.solver_max_iter_factor,
    )
    return {
        "labels": _as_list(result.labels),
        "label_values": _as_list(result.label_values),
        "probabilities": _as_list(result.probabilities),
        "residual": result.residual,
    }


def _pp_curvature(args: argparse.Namespace, config: RunConfig) -> Any:
    values, found = max_curvature(_read_mesh(args.mesh))
    _emit_diagnostics(found)
    return _as_list(values)


_POSTPROC: dict[str, Callable[[argparse.Namespace, RunConfig], Any]] = {
    "island-removal": _pp_island_removal,
    "closing": _pp_closing,
    "vote-fusion": _pp_vote_fusion,
    "dbscan": _pp_dbscan,
    "density-peaks": _pp_density_peaks,
    "offset-cluster": _pp_offset_cluster,
    "cluster-centroids": _pp_cluster_centroids,
    "fps": _pp_fps,
    "boundary-sample": _pp_boundary_sample,
    "grid": _pp_grid,
    "patch-crop": _pp_patch_crop,
    "crop-radius": _pp_crop_radius,
    "knn": _pp_knn,
    "merge-proposals": _pp_merge_proposals,
    "assign-proposals": _pp_assign_proposals,
    "arch-correct": _pp_arch_correct,
    "walker": _pp_walker,
    "curvature": _pp_curvature,
}


def cmd_postproc(args: argparse.Namespace, config: RunConfig) -> int:
    result = _POSTPROC[args.op](args, config)
    _emit(args, config, result)
    return 0


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------


def _targets(data: dict) -> losses.CentroidTargets:
    centroids = np.asarray(data["targets"], dtype=np.float64)
    if data.get("radii") is None:
        return losses.CentroidTargets.from_centroids(centroids)
    return losses.CentroidTargets(centroids, np.asarray(data["radii"], dtype=np.float64))


def _loss_igip(data: dict, config: RunConfig) -> losses.LossEvaluation:
    lam = float(data.get("lambda", config.igip_lambda))
    return losses.evaluate_igip_centroid_loss(np.asarray(data["predicted"], dtype=np.float64), _targets(data), lam)


def _loss_champers(data: dict, config: RunConfig) -> losses.LossEvaluation:
    return losses.evaluate_champers_centroid_loss(
        np.asarray(data["points"], dtype=np.float64),
        np.asarray(data["offsets"], dtype=np.float64),
        _targets(data),
        data.get("k"),
    )


def _loss_dice_ce(data: dict, config: RunConfig) -> losses.LossEvaluation:
    return losses.evaluate_dice_ce_loss(
        np.asarray(data["probabilities"], dtype=np.float64),
        np.asarray(data["targets"], dtype=np.float64),
        float(data.get("w0", 1.0)),
        float(data.get("w1", 1.0)),
        data.get("variant", config.dice_variant),
    )


def _loss_patch_weight(data: dict, config: RunConfig) -> losses.LossEvaluation:
    return losses.LossEvaluation(losses.patch_distance_weight(data["s"], data["c"]))


_LOSSES: dict[str, Callable[[dict, RunConfig], losses.LossEvaluation]] = {
    "igip": _loss_igip,
    "champers": _loss_champers,
    "dice-ce": _loss_dice_ce,
    "patch-weight": _loss_patch_weight,
}


def cmd_losses(args: argparse.Namespace, config: RunConfig) -> int:
    data = _read_json(args.input)
    if not isinstance(data, dict):
        raise InputError(f"{args.input} must hold a JSON object")
    try:
        evaluation = _LOSSES[args.name](data, config)
    except KeyError as exc:
        raise InputError(f"{args.input}: missing field {exc}") from None
    _emit_diagnostics(evaluation.diagnostics)
    if args.json:
        result: dict[str, Any] = {"loss": args.name, "value": evaluation.value}
        if evaluation.gradient is not None:
            result["gradient"] = _as_list(evaluation.gradient)
        sys.stdout.write(reports.dumps(reports.document(config, **result)))
    else:
        sys.stdout.write(f"{evaluation.value:.12g}\n")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _common() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", default=argparse.SUPPRESS, help="machine-readable output")
    common.add_argument("--log-level", default=argparse.SUPPRESS, help="logging level (default WARNING)")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="teethseg-bench",
        description="Tooth segmentation benchmark toolkit for intra-oral scans.",
        epilog=_usage,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="JSON run configuration file")
    parser.add_argument("--json", action="store_true", help="machine-readable output")
    parser.add_argument("--log-level", default="WARNING", help="logging level (default WARNING)")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    common = _common()

    def command(name: str, handler: Handler, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text, description=help_text, parents=[common])
        p.set_defaults(handler=handler)
        return p

    p = command("validate", cmd_validate, "Check a mesh and its annotation for consistency")
    p.add_argument("mesh")
    p.add_argument("annotation")

    p = command("clean", cmd_clean, "Remove degenerate/duplicate faces and merge coincident vertices")
    p.add_argument("mesh")
    p.add_argument("--annotation")
    p.add_argument("--out-mesh", required=True)
    p.add_argument("--out-annotation")
    p.add_argument("--merge-tolerance", dest="vertex_merge_tolerance", type=float)

    p = command("normalize", cmd_normalize, "Rotate and translate a scan into the canonical occlusal frame")
    p.add_argument("mesh")
    p.add_argument("--out-mesh", required=True)
    p.add_argument("--transform-out")
    p.add_argument("--weighting", dest="pca_weighting", choices=["vertex", "area"])

    p = command("flatten", cmd_flatten, "Crop a disk-shaped region and flatten it to a unit-disk chart")
    p.add_argument("mesh")
    p.add_argument("--out", required=True, help="chart JSON file")
    p.add_argument("--annotation")
    p.add_argument("--instance", type=int, help="crop around this tooth instance")
    p.add_argument("--center", type=float, nargs=3, metavar=("X", "Y", "Z"))
    p.add_argument("--radius", type=float)
    p.add_argument("--radius-factor", dest="crop_radius_factor", type=float)
    p.add_argument("--weights", dest="flatten_weights", choices=["cotangent", "uniform"])
    p.add_argument("--tolerance", dest="solver_tolerance", type=float)

    p = command("backproject", cmd_backproject, "Map a uv polygon back to parent-mesh vertex indices")
    p.add_argument("chart")
    p.add_argument("polygon")
    p.add_argument("--out")

    p = command("evaluate", cmd_evaluate, "Score predictions against ground truth (TLA, TSA, TIR)")
    p.add_argument("--gt-dir", required=True)
    p.add_argument("--pred-dir")
    p.add_argument("--pairs", help="manifest CSV: scan_id,gt_mesh,gt_annotation,prediction[,centroids]")
    p.add_argument("--team", default="team")
    p.add_argument("--out", help="JSON report file")
    p.add_argument("--csv", help="leaderboard CSV file")
    p.add_argument("--workers", type=int)
    p.add_argument("--tsa-averaging", choices=["gt_only", "symmetric"])
    p.add_argument("--size-definition", choices=["bounding_sphere", "bbox_diagonal"])
    p.add_argument("--missing-penalty", type=float)

    p = command("synth", cmd_synth, "Generate synthetic jaw scans with exact ground truth")
    p.add_argument("--config", dest="synth_config", help="synthetic jaw configuration (JSON)")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int)
    p.add_argument("--jaw", choices=[j.value for j in Jaw])
    p.add_argument("--tooth-count", type=int)
    p.add_argument("--patient-id")
    p.add_argument("--perturb", help="perturbation spec (JSON) applied to each scan")
    p.add_argument("--pred-out", help="directory for perturbed predictions")
    p.add_argument("--perturb-seed", type=int, default=0)

    p = command("postproc", cmd_postproc, "Run a post-processing or sampling operation")
    ops = p.add_subparsers(dest="op", required=True, metavar="op")

    def op(name: str, help_text: str) -> argparse.ArgumentParser:
        q = ops.add_parser(name, help=help_text, description=help_text, parents=[common])
        q.add_argument("--out")
        return q

    q = op("island-removal", "Fill unassigned faces and dissolve small islands")
    q.add_argument("mesh")
    q.add_argument("labels")
    q.add_argument("--min-island-faces", dest="island_min_faces", type=int)
    q = op("closing", "Morphological closing of a face label field")
    q.add_argument("mesh")
    q.add_argument("labels")
    q.add_argument("--iterations", dest="closing_iterations", type=int)
    q = op("vote-fusion", "Weighted majority vote of per-face label hits")
    q.add_argument("hits")
    q = op("dbscan", "Density-based clustering")
    q.add_argument("points")
    q.add_argument("--eps", dest="dbscan_eps", type=float)
    q.add_argument("--min-pts", dest="dbscan_min_pts", type=int)
    q = op("density-peaks", "Density-peak clustering with k centers")
    q.add_argument("points")
    q.add_argument("--k", type=int, required=True)
    q.add_argument("--cutoff", dest="density_cutoff", type=float)
    q = op("offset-cluster", "Cluster offset-shifted tooth points into instances")
    q.add_argument("points")
    q.add_argument("offsets")
    q.add_argument("gingiva_mask")
    q.add_argument("--eps", dest="dbscan_eps", type=float)
    q.add_argument("--min-pts", dest="dbscan_min_pts", type=int)
    q = op("cluster-centroids", "Merge redundant centroid predictions")
    q.add_argument("points")
    q.add_argument("--eps", dest="dbscan_eps", type=float)
    q.add_argument("--min-pts", dest="dbscan_min_pts", type=int)
    q.add_argument("--drop-noise", action="store_true")
    q = op("fps", "Farthest point sampling")
    q.add_argument("points")
    q.add_argument("--n", type=int, required=True)
    q.add_argument("--seed-index", dest="fps_seed_index", type=int)
    q = op("boundary-sample", "Farthest point sampling enriched with instance-boundary points")
    q.add_argument("points")
    q.add_argument("ids")
    q.add_argument("--n-extra", type=int, required=True)
    q.add_argument("--k", dest="boundary_k", type=int)
    q.add_argument("--seed-index", dest="fps_seed_index", type=int)
    q = op("grid", "Voxel-grid subsampling")
    q.add_argument("points")
    q.add_argument("--cell-size", dest="grid_cell_size", type=float)
    q = op("patch-crop", "Nearest-point patch around a center with distance weights")
    q.add_argument("points")
    q.add_argument("--center", type=float, nargs=3, required=True, metavar=("X", "Y", "Z"))
    q.add_argument("--patch-size", type=int)
    q = op("crop-radius", "Per-centroid crop radius from the nearest neighbor spacing")
    q.add_argument("centroids")
    q.add_argument("--factor", dest="crop_radius_factor", type=float)
    q = op("knn", "Interpolate labels or logits onto query points")
    q.add_argument("points")
    q.add_argument("values")
    q.add_argument("query")
    q.add_argument("--k", dest="knn_k", type=int)
    q.add_argument("--mode", choices=["vote", "logit"], default="vote")
    q = op("merge-proposals", "Merge overlapping tooth proposals")
    q.add_argument("proposals")
    q.add_argument("--iou-threshold", type=float)
    q = op("assign-proposals", "Project proposals to per-point labels and instances")
    q.add_argument("proposals")
    q.add_argument("labels")
    q.add_argument("--n-points", type=int, required=True)
    q = op("arch-correct", "Repair tooth labels along the fitted dental arch")
    q.add_argument("teeth")
    q.add_argument("--jaw", choices=[j.value for j in Jaw], required=True)
    q = op("walker", "Random-walker labeling from seed vertices")
    q.add_argument("mesh")
    q.add_argument("seeds")
    q.add_argument("--beta", dest="walker_beta", type=float)
    q.add_argument("--tolerance", dest="walker_tolerance", type=float)
    q = op("curvature", "Per-vertex maximum principal curvature")
    q.add_argument("mesh")

    p = command("losses", cmd_losses, "Evaluate a training loss on a JSON input")
    modes = p.add_subparsers(dest="mode", required=True, metavar="mode")
    e = modes.add_parser("eval", help="evaluate a loss and print its value", parents=[common])
    e.add_argument("name", choices=sorted(_LOSSES))
    e.add_argument("input")
    e.add_argument("--lambda", dest="igip_lambda", type=float)
    e.add_argument("--dice-variant", choices=["printed", "standard"])
    return parser


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    return {key: getattr(args, key) for key in RunConfig.model_fields if getattr(args, key, None) is not None}


def _fail(code: str, message: str) -> None:
    print(json.dumps(diag.error(code, message).to_dict(), sort_keys=True), file=sys.stderr)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2

    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
        stream=sys.stderr,
        format="%(levelname)s %(name)s %(message)s",
    )
    try:
        config = load_config(args.config, _overrides(args))
    except ValueError as exc:
        _fail("config", str(exc))
        return 2

    recorder = RunStatsRecorder()
    with recorder.track(args.command) as outcome:
        try:
            code = args.handler(args, config)
        except UsageError as exc:
            _fail("usage", str(exc))
            code = 2
        except TeethSegError as exc:
            print(json.dumps(exc.to_dict(), sort_keys=True), file=sys.stderr)
            code = 1
        except OSError as exc:
            _fail("io-error", str(exc))
            code = 1
        except ValueError as exc:
            _fail("invalid-input", str(exc))
            code = 1
        except Exception as exc:
            logger.exception("command_failed name=%s", args.command)
            _fail("internal-error", f"{type(exc).__name__}: {exc}")
            code = 1
        outcome.failed = code != 0
    return code
