"""Tests for the challenge evaluation metrics."""

import math

import pytest
from beartype.roar import BeartypeCallHintParamViolation

from teethseg_bench.errors import EmptyEvaluationError, EvaluationError
from teethseg_bench.mesh_types import ScanAnnotation
from teethseg_bench.metrics import (
    MISSING_PENALTY,
    TsaAveraging,
    aggregate,
    evaluate_scan,
    f1,
    global_score,
    leaderboard_csv,
    leaderboard_row,
)
from tests.mesh_fixtures import annotation_for, face_strip

# Published leaderboard rows: (Exp(-TLA), TSA, TIR, score).
LEADERBOARD = {
    "CGIP": (0.9658, 0.9859, 0.9100, 0.9539),
    "FiboSeg": (0.9924, 0.9293, 0.9223, 0.9480),
    "IGIP": (0.9244, 0.9750, 0.9289, 0.9427),
    "TeethSeg": (0.9184, 0.9678, 0.8538, 0.9133),
    "OS": (0.7845, 0.9693, 0.8940, 0.8826),
    "Chompers": (0.6242, 0.8886, 0.8795, 0.7974),
}


# ----------------------------------------------------------------------
# Helpers
# ----------------------------------------------------------------------


def _strip_case(spurious: bool = False):
    """Two ground-truth teeth on the face strip; the prediction moves vertex 2 to the second tooth."""
    mesh = face_strip()
    gt = annotation_for(mesh, [11, 11, 11, 21, 21, 21, 0], [1, 1, 1, 2, 2, 2, 0])
    pred_labels = [11, 11, 21, 21, 21, 21, 22 if spurious else 0]
    pred_instances = [1, 1, 2, 2, 2, 2, 3 if spurious else 0]
    pred = annotation_for(mesh, pred_labels, pred_instances)
    return mesh, gt, pred


class TestScalarHelpers:
    """F1 and the leaderboard score."""

    def test_f1_of_zeros(self):
        assert f1(0.0, 0.0) == 0.0

    def test_f1_accepts_ints(self):
        assert f1(1, 1) == 1.0

    def test_f1_rejects_strings(self):
        with pytest.raises(BeartypeCallHintParamViolation):
            f1("1", 1.0)

    @pytest.mark.parametrize("team", sorted(LEADERBOARD))
    def test_published_rows(self, team):
        exp_tla, tsa, tir, score = LEADERBOARD[team]
        assert global_score(exp_tla, tsa, tir) == pytest.approx(score, abs=1.5e-4)


class TestEvaluateScan:
    """Per-tooth records of a single scan."""

    def test_hand_computed_records(self):
        mesh, gt, pred = _strip_case()
        partial = evaluate_scan(mesh, gt, pred)
        first, second = partial.records
        assert first.normalized_distance == pytest.approx(0.25)
        assert second.normalized_distance == pytest.approx(math.sqrt(2) / (4 * math.sqrt(5)))
        assert first.f1 == pytest.approx(0.8)
        assert second.f1 == pytest.approx(6 / 7)
        assert first.identified and second.identified
        assert (first.matched_pred_id, second.matched_pred_id) == (1, 2)

    def test_scan_id_defaults_to_stem(self, small_scan):
        partial = evaluate_scan(small_scan.mesh, small_scan.annotation, small_scan.annotation)
        assert partial.scan_id == "fixture_upper"

    def test_missing_prediction(self, small_scan):
        partial = evaluate_scan(small_scan.mesh, small_scan.annotation, None)
        assert partial.missing_output
        assert all(r.normalized_distance == MISSING_PENALTY for r in partial.records)
        assert all(r.f1 == 0.0 and not r.identified for r in partial.records)
        assert partial.diagnostics.codes() == {"missing-output"}

    def test_wrong_length_counts_as_missing(self, small_scan):
        pred = ScanAnnotation("fixture", "upper", [0, 0], [0, 0])
        partial = evaluate_scan(small_scan.mesh, small_scan.annotation, pred)
        assert partial.missing_output
        assert partial.diagnostics.codes() == {"length-mismatch"}

    def test_all_gingiva_prediction(self, small_scan):
        n = small_scan.mesh.vertex_count
        pred = ScanAnnotation("fixture", "upper", [0] * n, [0] * n)
        partial = evaluate_scan(small_scan.mesh, small_scan.annotation, pred)
        assert not partial.missing_output
        assert all(r.normalized_distance == MISSING_PENALTY for r in partial.records)
        assert "empty-prediction" in partial.diagnostics.codes()

    def test_centroid_channel_replaces_instance_centroids(self):
        mesh, gt, pred = _strip_case()
        channel = [((1 / 3, 1 / 3, 0.0), 11), ((5 / 3, 2 / 3, 0.0), 22)]
        first, second = evaluate_scan(mesh, gt, pred, pred_centroids=channel).records
        assert first.normalized_distance == pytest.approx(0.0, abs=1e-12)
        assert first.identified
        assert second.normalized_distance == pytest.approx(0.0, abs=1e-12)
        assert not second.identified
        assert second.nearest_pred_id == 2


class TestAggregate:
    """Pooling across scans."""

    def test_perfect_prediction_scores_exactly_one(self, small_scan, lower_scan):
        partials = [evaluate_scan(s.mesh, s.annotation, s.annotation) for s in (small_scan, lower_scan)]
        report = aggregate(partials)
        assert report.tla == 0.0
        assert report.tsa == 1.0
        assert report.tir == 1.0
        assert report.score == 1.0
        assert report.pooled_gt_teeth == 10

    def test_missing_scan_is_pooled_by_tooth(self, small_scan, lower_scan):
        partials = [
            evaluate_scan(small_scan.mesh, small_scan.annotation, small_scan.annotation),
            evaluate_scan(lower_scan.mesh, lower_scan.annotation, None),
        ]
        report = aggregate(partials)
        assert report.tla == pytest.approx(MISSING_PENALTY * 6 / 10)
        assert report.tir == pytest.approx(0.4)
        assert report.tsa == pytest.approx(0.4)
        assert report.missing_scans == ["lower_lower"]

    def test_hand_computed_report(self):
        mesh, gt, pred = _strip_case()
        report = aggregate([evaluate_scan(mesh, gt, pred)])
        expected_tla = (0.25 + math.sqrt(2) / (4 * math.sqrt(5))) / 2
        assert report.tla == pytest.approx(expected_tla)
        assert report.exp_neg_tla == pytest.approx(math.exp(-expected_tla))
        assert report.tsa == pytest.approx((0.8 + 6 / 7) / 2)
        assert report.tir == 1.0

    def test_symmetric_averaging_counts_spurious_predictions(self):
        mesh, gt, pred = _strip_case(spurious=True)
        partial = evaluate_scan(mesh, gt, pred)
        gt_only = aggregate([partial])
        symmetric = aggregate([partial], TsaAveraging.SYMMETRIC)
        assert gt_only.tsa == pytest.approx((0.8 + 6 / 7) / 2)
        assert symmetric.tsa == pytest.approx((2 * 0.8 + 2 * 6 / 7) / 5)
        assert symmetric.tla == gt_only.tla

    def test_nothing_to_evaluate(self, strip):
        with pytest.raises(EmptyEvaluationError):
            aggregate([])
        gt = annotation_for(strip, [0] * 7, [0] * 7)
        with pytest.raises(EvaluationError):
            aggregate([evaluate_scan(strip, gt, gt)])


class TestLeaderboard:
    """Leaderboard table output."""

    def test_csv_row(self, small_scan):
        report = aggregate([evaluate_scan(small_scan.mesh, small_scan.annotation, small_scan.annotation)])
        text = leaderboard_csv(leaderboard_row(report, "oracle"))
        assert text == "team,expTLA,TSA,TIR,score\noracle,1.0000,1.0000,1.0000,1.0000\n"

    def test_report_dict_is_json_ready(self):
        mesh, gt, pred = _strip_case()
        data = aggregate([evaluate_scan(mesh, gt, pred)]).to_dict()
        assert data["tsa_averaging"] == "gt_only"
        assert data["per_scan"][0]["records"][0]["gt_label"] == 11
