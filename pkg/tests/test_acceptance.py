"""Acceptance-scale property suites on synthetic data.

Run with ``python run_tests.py -slow``.
"""

import math

import numpy as np
import pytest
from scipy.spatial.distance import cdist

from teethseg_bench.fdi import Jaw, arch_sequence
from teethseg_bench.losses import (
    CentroidTargets,
    champers_centroid_loss,
    evaluate_champers_centroid_loss,
    evaluate_igip_centroid_loss,
    igip_centroid_loss,
    patch_distance_weight,
)
from teethseg_bench.mesh_io import parse_annotation, parse_obj, write_annotation, write_obj
from teethseg_bench.metrics import aggregate, evaluate_scan
from teethseg_bench.postproc import arch_label_correct, dbscan, density_peaks, fit_arch_curve, random_walker_graph
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
    perturb,
)
from teethseg_bench.uvflatten import FlattenWeights, crop_sphere, flipped_triangles, harmonic_flatten
from tests.test_losses import _finite_difference
from tests.test_postproc import _reference_dbscan

pytestmark = pytest.mark.slow


# ----------------------------------------------------------------------
# Reference implementations
# ----------------------------------------------------------------------


def _reference_scan(mesh, gt, pred, centroids):
    """(normalized distance, f1, identified) per ground-truth tooth, by explicit loops."""
    vertices = mesh.vertices
    gt_ids = sorted(set(gt.instances.tolist()) - {0})
    pred_ids = [
        p for p in sorted(set(pred.instances.tolist()) - {0}) if np.any(pred.labels[pred.instances == p] != 0)
    ]
    pred_sizes = {p: int(np.sum(pred.instances == p)) for p in pred_ids}
    rows = []
    for g in gt_ids:
        members = np.flatnonzero(gt.instances == g)
        centroid = vertices[members].mean(axis=0)
        size = 2.0 * max(math.dist(vertices[v], centroid) for v in members)
        label = int(gt.labels[members[0]])

        nearest, raw = None, math.inf
        for k, (point, _) in enumerate(centroids):
            d = math.dist(centroid, point)
            if d < raw:
                nearest, raw = k, d
        identified = raw < size / 2.0 and centroids[nearest][1] == label

        counts = {p: sum(1 for v in members if pred.instances[v] == p) for p in pred_ids}
        best = max(pred_ids, key=lambda p: (counts[p], -p), default=None)
        f1 = 0.0
        if best is not None and counts[best] > 0:
            precision = counts[best] / pred_sizes[best]
            recall = counts[best] / len(members)
            f1 = 2 * precision * recall / (precision + recall)
        rows.append((raw / size, f1, identified))
    return rows


def _reference_density_peaks(points: np.ndarray, cutoff: float, k: int):
    n = len(points)
    d = cdist(points, points)
    rho = [sum(1 for j in range(n) if j != i and d[i, j] < cutoff) for i in range(n)]
    gamma = []
    for i in range(n):
        higher = [d[i, j] for j in range(n) if rho[j] > rho[i] or (rho[j] == rho[i] and j < i)]
        delta = min(higher) if higher else d.max()
        gamma.append(rho[i] * delta)
    centers = sorted(sorted(range(n), key=lambda i: (-gamma[i], i))[:k])
    assignment = []
    for i in range(n):
        if i in centers:
            assignment.append(centers.index(i))
            continue
        best = 0
        for c in range(1, k):
            if d[i, centers[c]] < d[i, centers[best]]:
                best = c
        assignment.append(best)
    return centers, assignment


def _random_operations(rng: np.random.Generator, n: int, jaw: Jaw) -> list:
    order = [int(i) for i in rng.permutation(np.arange(1, n + 1))]
    operations: list = []
    drops = 0
    while order:
        i = order.pop()
        action = rng.integers(0, 6)
        if action == 1 and drops < n - 1:
            operations.append(DropTooth(i=i))
            drops += 1
        elif action == 2:
            operations.append(JitterInstance(i=i, displacement=float(rng.uniform(0.0, 4.0))))
        elif action == 3:
            operations.append(ErodeInstance(i=i, fraction=float(rng.uniform(0.1, 0.8))))
        elif action == 4:
            operations.append(Relabel(i=i, label=int(rng.choice(arch_sequence(jaw)))))
        elif action == 5 and order:
            operations.append(SwapLabels(i=i, j=order.pop()))
    return operations


# ----------------------------------------------------------------------
# Evaluation protocol
# ----------------------------------------------------------------------


class TestProtocol:
    """Leaderboard metrics on synthetic scan sets."""

    def test_perfect_predictions_score_exactly_one(self):
        scans = generate_dataset(SynthConfig(patient_id="id", tooth_count=4, subdivisions=1), 100)
        report = aggregate([evaluate_scan(s.mesh, s.annotation, s.annotation) for s in scans])
        assert (report.tla, report.exp_neg_tla, report.tsa, report.tir, report.score) == (0.0, 1.0, 1.0, 1.0, 1.0)

    def test_missing_scan_penalty(self):
        scans = [
            generate_jaw(SynthConfig(patient_id=f"p{k}", tooth_count=4 + 2 * (k % 4), subdivisions=1, seed=k))
            for k in range(10)
        ]
        partials = [
            evaluate_scan(s.mesh, s.annotation, None if k == 3 else s.annotation) for k, s in enumerate(scans)
        ]
        total = sum(p.gt_tooth_count for p in partials)
        report = aggregate(partials)
        assert report.tla == pytest.approx(5.0 * scans[3].extras.labels.size / total, abs=1e-12)
        assert report.missing_scans == [scans[3].stem]

    def test_metrics_match_reference(self):
        rng = np.random.default_rng(2024)
        partials, expected = [], []
        for k in range(200):
            jaw = Jaw.UPPER if k % 2 == 0 else Jaw.LOWER
            config = SynthConfig(
                patient_id=f"r{k}", jaw=jaw, tooth_count=int(rng.choice([4, 6, 8])), subdivisions=1, seed=k
            )
            scan = generate_jaw(config)
            assert scan.mesh.vertex_count <= 500
            spec = PerturbSpec(operations=_random_operations(rng, config.tooth_count, jaw))
            result = perturb(scan, spec, seed=k)
            partial = evaluate_scan(scan.mesh, scan.annotation, result.prediction, pred_centroids=result.centroids)
            rows = _reference_scan(scan.mesh, scan.annotation, result.prediction, result.centroids)
            for record, (distance, f1, identified) in zip(partial.records, rows, strict=True):
                assert record.normalized_distance == pytest.approx(distance, abs=1e-12)
                assert record.f1 == pytest.approx(f1, abs=1e-12)
                assert record.identified == identified
            partials.append(partial)
            expected.extend(rows)

        report = aggregate(partials)
        n = len(expected)
        assert report.tla == pytest.approx(math.fsum(r[0] for r in expected) / n, abs=1e-12)
        assert report.tsa == pytest.approx(math.fsum(r[1] for r in expected) / n, abs=1e-12)
        assert report.tir == pytest.approx(sum(1 for r in expected if r[2]) / n, abs=1e-12)


class TestDeterminism:
    def test_same_seed_gives_identical_files(self):
        config = SynthConfig(tooth_count=8, seed=77)
        first, second = generate_jaw(config), generate_jaw(config)
        assert write_obj(first.mesh) == write_obj(second.mesh)
        assert write_annotation(first.annotation) == write_annotation(second.annotation)

    def test_write_parse_write_is_stable(self, full_scan):
        obj = write_obj(full_scan.mesh)
        annotation = write_annotation(full_scan.annotation)
        mesh = parse_obj(obj)
        assert write_obj(mesh) == obj
        assert write_annotation(parse_annotation(annotation, mesh.vertex_count)) == annotation


# ----------------------------------------------------------------------
# Geometry
# ----------------------------------------------------------------------


class TestFlatteningAtScale:
    """Tooth caps of many jaws flatten onto the unit disk."""

    @pytest.mark.parametrize("subdivisions", [2, 3])
    def test_tooth_caps(self, subdivisions):
        for seed in range(5):
            config = SynthConfig(patient_id=f"f{seed}", tooth_count=6, subdivisions=subdivisions, seed=seed)
            scan = generate_jaw(config)
            for k in range(5):
                sub = crop_sphere(scan.mesh, scan.extras.sphere_centers[k], scan.extras.radii[k] * 1.01)
                chart = harmonic_flatten(sub, FlattenWeights.COTANGENT)
                np.testing.assert_allclose(np.linalg.norm(chart.uv[chart.boundary_loop], axis=1), 1.0, atol=1e-9)
                assert chart.residual <= 1e-10
                uniform = harmonic_flatten(sub, FlattenWeights.UNIFORM)
                assert flipped_triangles(uniform, sub.mesh.faces).size == 0


# ----------------------------------------------------------------------
# Post-processing
# ----------------------------------------------------------------------


class TestClusteringOracles:
    @pytest.mark.parametrize("seed", range(100))
    def test_dbscan(self, seed):
        rng = np.random.default_rng(seed)
        points = rng.uniform(size=(int(rng.integers(20, 200)), 2))
        np.testing.assert_array_equal(dbscan(points, 0.1, 4), _reference_dbscan(points, 0.1, 4))

    @pytest.mark.parametrize("seed", range(100))
    def test_density_peaks(self, seed):
        rng = np.random.default_rng(1000 + seed)
        points = rng.uniform(size=(int(rng.integers(20, 200)), 2))
        centers, assignment = density_peaks(points, 0.15, 3)
        ref_centers, ref_assignment = _reference_density_peaks(points, 0.15, 3)
        assert centers.tolist() == ref_centers
        assert assignment.tolist() == ref_assignment


class TestWalkerInvariants:
    """Harmonicity and maximum principle on random weighted graphs."""

    @pytest.mark.parametrize("seed", range(20))
    def test_random_graph(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(10, 60))
        edges = {(i, i + 1) for i in range(n - 1)}
        for _ in range(2 * n):
            a, b = sorted(int(v) for v in rng.choice(n, size=2, replace=False))
            edges.add((a, b))
        edge_array = np.asarray(sorted(edges), dtype=np.int64)
        weights = rng.uniform(0.1, 2.0, size=len(edge_array))
        seed_vertices = rng.choice(n, size=3, replace=False)
        seeds = {int(v): label for v, label in zip(seed_vertices, (11, 21, 31))}

        result = random_walker_graph(n, edge_array, weights, seeds)
        p = result.probabilities
        assert np.all(p >= -1e-12)
        assert np.all(p <= 1 + 1e-12)
        np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-9)

        balance = np.zeros_like(p)
        for (a, b), w in zip(edge_array, weights):
            balance[a] += w * (p[a] - p[b])
            balance[b] += w * (p[b] - p[a])
        unseeded = np.setdiff1d(np.arange(n), seed_vertices)
        np.testing.assert_allclose(balance[unseeded], 0.0, atol=1e-8)


class TestArchCorrection:
    """Injected duplicate and swapped labels are repaired along the fitted arch."""

    def test_duplicates_are_repaired(self):
        rng = np.random.default_rng(5)
        for k in range(50):
            jaw = Jaw.UPPER if k % 2 == 0 else Jaw.LOWER
            count = int(rng.choice([4, 6, 8, 10, 12, 14]))
            scan = generate_jaw(SynthConfig(patient_id=f"a{k}", jaw=jaw, tooth_count=count, subdivisions=1, seed=k))
            labels = scan.extras.labels.tolist()
            broken = list(labels)
            position = int(rng.integers(0, count))
            neighbor = position - 1 if position > 0 and (position == count - 1 or rng.random() < 0.5) else position + 1
            broken[position] = broken[neighbor]
            curve = fit_arch_curve(scan.extras.centroids)
            corrected = arch_label_correct(list(zip(scan.extras.centroids.tolist(), broken)), curve, jaw)
            assert corrected == labels

    def test_swaps_are_repaired(self):
        rng = np.random.default_rng(9)
        for k in range(50):
            jaw = Jaw.UPPER if k % 2 == 0 else Jaw.LOWER
            count = int(rng.choice([4, 6, 8, 10, 12, 14]))
            scan = generate_jaw(SynthConfig(patient_id=f"s{k}", jaw=jaw, tooth_count=count, subdivisions=1, seed=k))
            labels = scan.extras.labels.tolist()
            broken = list(labels)
            # every fifth scan exchanges the two teeth at one end of the arch
            position = (0 if k % 10 == 0 else count - 2) if k % 5 == 0 else int(rng.integers(0, count - 1))
            broken[position], broken[position + 1] = broken[position + 1], broken[position]
            curve = fit_arch_curve(scan.extras.centroids)
            corrected = arch_label_correct(list(zip(scan.extras.centroids.tolist(), broken)), curve, jaw)
            assert corrected == labels


# ----------------------------------------------------------------------
# Losses
# ----------------------------------------------------------------------


class TestLossProperties:
    """Zero at perfect configurations, analytic gradients at random ones."""

    def test_vanish_at_perfect_configurations(self):
        rng = np.random.default_rng(3)
        centroids = np.arange(5)[:, None] * np.array([10.0, 0.0, 0.0]) + rng.normal(size=(5, 3))
        targets = CentroidTargets(centroids, rng.uniform(2.0, 4.0, size=5))
        assert igip_centroid_loss(centroids, targets) == 0.0
        points = centroids[[0, 0, 2, 4]] + rng.normal(scale=0.5, size=(4, 3))
        offsets = centroids[[0, 0, 2, 4]] - points
        assert champers_centroid_loss(points, offsets, targets) == pytest.approx(0.0, abs=1e-12)
        assert patch_distance_weight([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 1.0

    @pytest.mark.parametrize("seed", range(100))
    def test_gradients(self, seed):
        rng = np.random.default_rng(seed)
        centroids = np.arange(6)[:, None] * np.array([10.0, 0.0, 0.0]) + rng.normal(size=(6, 3))
        targets = CentroidTargets(centroids, rng.uniform(2.0, 4.0, size=6))

        pred = centroids[:4] + rng.normal(scale=0.3, size=(4, 3))
        result = evaluate_igip_centroid_loss(pred, targets)
        expected = _finite_difference(lambda p: evaluate_igip_centroid_loss(p, targets).value, pred)
        np.testing.assert_allclose(result.gradient, expected, rtol=1e-5, atol=1e-7)

        points = centroids[:4] + rng.normal(scale=1.0, size=(4, 3))
        offsets = rng.normal(scale=0.3, size=(4, 3))
        result = evaluate_champers_centroid_loss(points, offsets, targets)
        expected = _finite_difference(lambda o: evaluate_champers_centroid_loss(points, o, targets).value, offsets)
        np.testing.assert_allclose(result.gradient, expected, rtol=1e-5, atol=1e-7)
