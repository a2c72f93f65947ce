"""Tests for the synthetic jaw generator and prediction perturbations."""

import json

import numpy as np
import pytest
from pydantic import ValidationError

from teethseg_bench.errors import PerturbError, SynthConfigError
from teethseg_bench.fdi import Jaw
from teethseg_bench.mesh_io import parse_annotation, parse_obj
from teethseg_bench.metrics import aggregate, evaluate_scan
from teethseg_bench.synthgen import (
    DropTooth,
    ErodeInstance,
    JitterInstance,
    PerturbSpec,
    Relabel,
    SwapLabels,
    SynthConfig,
    generate_dataset,
    generate_jaw,
    icosphere,
    perturb,
    write_scans,
)
from teethseg_bench.validators import validate_scan


class TestIcosphere:
    @pytest.mark.parametrize("level,vertices", [(0, 12), (1, 42), (2, 162)])
    def test_counts(self, level, vertices):
        sphere = icosphere(level)
        assert sphere.vertex_count == vertices
        np.testing.assert_allclose(np.linalg.norm(sphere.vertices, axis=1), 1.0)

    def test_faces_point_outwards(self):
        sphere = icosphere(1)
        centers = sphere.vertices[sphere.faces].mean(axis=1)
        assert np.all(np.einsum("ij,ij->i", sphere.face_normals(), centers) > 0)


class TestSynthConfig:
    """Parameter validation."""

    @pytest.mark.parametrize(
        "overrides",
        [{"tooth_count": 5}, {"tooth_count": 2}, {"tooth_count": 18}, {"tooth_radius": (4.0, 3.0)}, {"extra": 1}],
        ids=["odd", "too-few", "too-many", "radius-order", "unknown-field"],
    )
    def test_rejects(self, overrides):
        with pytest.raises(ValidationError):
            SynthConfig(**overrides)

    def test_overlapping_teeth(self):
        with pytest.raises(SynthConfigError, match="overlap"):
            generate_jaw(SynthConfig(tooth_spacing=5.0))


class TestGenerateJaw:
    """Generated scans and their ground truth."""

    def test_is_deterministic(self):
        config = SynthConfig(tooth_count=6, seed=42)
        first, second = generate_jaw(config), generate_jaw(config)
        assert first.mesh == second.mesh
        assert first.annotation == second.annotation

    def test_teeth_do_not_move_when_teeth_are_added(self):
        small = generate_jaw(SynthConfig(tooth_count=4, seed=9))
        large = generate_jaw(SynthConfig(tooth_count=8, seed=9))
        shared = {int(lab): r for lab, r in zip(large.extras.labels, large.extras.radii)}
        for label, radius in zip(small.extras.labels, small.extras.radii):
            assert shared[int(label)] == radius

    def test_labels_are_centred_on_the_midline(self, small_scan, lower_scan):
        assert small_scan.extras.labels.tolist() == [12, 11, 21, 22]
        assert lower_scan.extras.labels.tolist() == [43, 42, 41, 31, 32, 33]
        assert lower_scan.annotation.jaw is Jaw.LOWER

    def test_scan_is_consistent(self, full_scan):
        assert len(validate_scan(full_scan.mesh, full_scan.annotation)) == 0
        assert full_scan.extras.instance_ids.tolist() == list(range(1, 15))

    def test_offsets_point_at_centroids(self, small_scan):
        extras = small_scan.extras
        members = small_scan.annotation.instances == 2
        shifted = small_scan.mesh.vertices[members] + extras.offsets[members]
        np.testing.assert_allclose(shifted, np.broadcast_to(extras.centroids[1], shifted.shape), atol=1e-12)
        assert not extras.offsets[small_scan.annotation.instances == 0].any()

    def test_dataset_ids_and_seeds(self):
        scans = generate_dataset(SynthConfig(patient_id="set", tooth_count=4, seed=1), 2)
        assert [s.stem for s in scans] == ["set0000_upper", "set0001_upper"]
        assert scans[0].mesh == generate_jaw(SynthConfig(patient_id="x", tooth_count=4, seed=1)).mesh

    def test_dataset_count_must_be_positive(self):
        with pytest.raises(SynthConfigError):
            generate_dataset(SynthConfig(), 0)

    def test_written_files_parse_back(self, small_scan, tmp_path):
        written = write_scans([small_scan], tmp_path)
        assert sorted(p.name for p in written) == ["extras.json", "fixture_upper.json", "fixture_upper.obj"]
        mesh = parse_obj((tmp_path / "fixture_upper.obj").read_bytes())
        annotation = parse_annotation((tmp_path / "fixture_upper.json").read_bytes(), mesh.vertex_count)
        assert mesh == small_scan.mesh
        assert annotation == small_scan.annotation
        extras = json.loads((tmp_path / "extras.json").read_text(encoding="utf-8"))
        assert [t["label"] for t in extras["fixture_upper"]["teeth"]] == [12, 11, 21, 22]


# ----------------------------------------------------------------------
# Perturbations
# ----------------------------------------------------------------------


def _evaluate(scan, result):
    return evaluate_scan(scan.mesh, scan.annotation, result.prediction, pred_centroids=result.centroids)


def _assert_matches_expected(scan, result):
    records = _evaluate(scan, result).records
    assert len(records) == len(result.expected.teeth)
    for record, expected in zip(records, result.expected.teeth):
        assert record.gt_instance_id == expected.instance_id
        assert record.normalized_distance == pytest.approx(expected.normalized_distance, abs=1e-9)
        assert record.f1 == pytest.approx(expected.f1, abs=1e-9)
        assert record.identified == expected.identified


class TestPerturb:
    """Perturbed predictions carry their own expected scores."""

    def test_empty_spec_is_a_perfect_prediction(self, small_scan):
        result = perturb(small_scan, PerturbSpec())
        assert result.prediction == small_scan.annotation
        assert result.expected.tla_sum_delta == pytest.approx(0.0, abs=1e-12)
        assert aggregate([_evaluate(small_scan, result)]).score == 1.0

    @pytest.mark.parametrize(
        "operations",
        [
            [SwapLabels(i=1, j=2)],
            [DropTooth(i=3)],
            [JitterInstance(i=2, displacement=0.4)],
            [ErodeInstance(i=4, fraction=0.3)],
            [Relabel(i=1, label=18)],
            [ErodeInstance(i=1, fraction=0.5), JitterInstance(i=1, displacement=1.0, direction=(0, 0, 1))],
        ],
        ids=["swap", "drop", "jitter", "erode", "relabel", "erode-then-jitter"],
    )
    def test_expected_scores_match_evaluation(self, small_scan, operations):
        result = perturb(small_scan, PerturbSpec(operations=operations), seed=5)
        _assert_matches_expected(small_scan, result)

    def test_swap_costs_identification_only(self, small_scan):
        result = perturb(small_scan, PerturbSpec(operations=[SwapLabels(i=1, j=2)]))
        assert result.expected.identified_delta == -2
        assert result.expected.f1_sum_delta == pytest.approx(0.0)

    def test_drop_scores_nearest_remaining_tooth(self, small_scan):
        result = perturb(small_scan, PerturbSpec(operations=[DropTooth(i=3)]))
        dropped = result.expected.teeth[2]
        assert dropped.f1 == 0.0
        assert not dropped.identified
        assert dropped.normalized_distance > 1.0

    def test_large_jitter_loses_identification(self, small_scan):
        size = small_scan.extras.sizes[1]
        spec = PerturbSpec(operations=[JitterInstance(i=2, displacement=0.6 * size, direction=(1, 0, 0))])
        tooth = perturb(small_scan, spec).expected.teeth[1]
        assert tooth.normalized_distance == pytest.approx(0.6)
        assert not tooth.identified

    def test_jitter_direction_depends_on_seed(self, small_scan):
        spec = PerturbSpec(operations=[JitterInstance(i=2, displacement=1.0)])
        assert perturb(small_scan, spec, seed=1).centroids != perturb(small_scan, spec, seed=2).centroids
        assert perturb(small_scan, spec, seed=1).centroids == perturb(small_scan, spec, seed=1).centroids

    def test_spec_from_json(self):
        spec = PerturbSpec.model_validate_json('{"operations": [{"op": "drop_tooth", "i": 1}]}')
        assert isinstance(spec.operations[0], DropTooth)

    @pytest.mark.parametrize(
        "operations",
        [[DropTooth(i=9)], [SwapLabels(i=1, j=1)], [Relabel(i=1, label=19)], [DropTooth(i=1), DropTooth(i=1)]],
        ids=["unknown-instance", "self-swap", "invalid-label", "dropped-twice"],
    )
    def test_invalid_operations(self, small_scan, operations):
        with pytest.raises(PerturbError):
            perturb(small_scan, PerturbSpec(operations=operations))
