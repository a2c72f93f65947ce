"""Tests for tooth cropping, harmonic flattening and polygon back-projection."""

import json

import numpy as np
import pytest

from teethseg_bench.errors import EmptySelectionError, InvalidPolygonError, NotADiskError
from teethseg_bench.mesh_types import TriMesh
from teethseg_bench.synthgen import icosphere
from teethseg_bench.uvflatten import (
    FlattenWeights,
    SubMesh,
    backproject_polygon,
    boundary_loop,
    chart_from_dict,
    chart_to_dict,
    circle_boundary,
    crop_sphere,
    crop_tooth,
    flipped_triangles,
    harmonic_flatten,
    laplacian_residual,
)
from teethseg_bench.validators import extract_instances
from tests.mesh_fixtures import grid_mesh

WHOLE_DISK = [(-2.0, -2.0), (2.0, -2.0), (2.0, 2.0), (-2.0, 2.0)]


# ----------------------------------------------------------------------
# Helpers
# ----------------------------------------------------------------------


def _tooth_cap(scan, k: int = 0) -> SubMesh:
    extras = scan.extras
    return crop_sphere(scan.mesh, extras.sphere_centers[k], extras.radii[k] * 1.01)


def _on_unit_circle(chart) -> np.ndarray:
    return np.linalg.norm(chart.uv[chart.boundary_loop], axis=1)


class TestCrop:
    """Sphere crops and their index maps."""

    def test_tooth_cap_is_the_largest_component(self, small_scan):
        sub = _tooth_cap(small_scan)
        assert np.all(small_scan.annotation.instances[sub.parent_index_map] == 1)
        np.testing.assert_array_equal(sub.mesh.vertices, small_scan.mesh.vertices[sub.parent_index_map])

    def test_crop_tooth_uses_instance_size(self, small_scan):
        tooth = extract_instances(small_scan.mesh, small_scan.annotation)[1]
        sub = crop_tooth(small_scan.mesh, tooth, radius_factor=0.6)
        assert set(small_scan.annotation.instances[sub.parent_index_map].tolist()) == {2}

    def test_empty_selection(self, grid):
        with pytest.raises(EmptySelectionError):
            crop_sphere(grid, np.array([100.0, 100.0, 0.0]), 1.0)

    def test_radius_must_be_positive(self, grid):
        with pytest.raises(ValueError):
            crop_sphere(grid, np.zeros(3), 0.0)


class TestBoundaryLoop:
    """Disk checks."""

    def test_grid_loop_starts_at_smallest_vertex(self, grid):
        loop = boundary_loop(SubMesh.whole(grid))
        assert loop[:6].tolist() == [0, 1, 2, 3, 4, 9]
        assert len(loop) == 16

    def test_circle_positions_follow_arc_length(self, grid):
        loop = boundary_loop(SubMesh.whole(grid))
        uv = circle_boundary(grid.vertices, loop)
        angles = np.mod(np.arctan2(uv[:, 1], uv[:, 0]), 2 * np.pi)
        np.testing.assert_allclose(angles, 2 * np.pi * np.arange(16) / 16, atol=1e-12)

    def test_closed_surface(self):
        with pytest.raises(NotADiskError, match="no boundary"):
            boundary_loop(SubMesh.whole(icosphere(1)))

    def test_annulus(self):
        grid = grid_mesh(4, 4)
        faces = np.delete(grid.faces, [8, 9], axis=0)
        with pytest.raises(NotADiskError):
            boundary_loop(SubMesh.whole(TriMesh(grid.vertices, faces)))

    def test_pinched_boundary(self):
        vertices = np.array([[0.0, 0, 0], [1, 0, 0], [1, 1, 0], [-1, 0, 0], [-1, -1, 0]])
        mesh = TriMesh(vertices, np.array([[0, 1, 2], [0, 3, 4]]))
        with pytest.raises(NotADiskError, match="pinched"):
            boundary_loop(SubMesh.whole(mesh))


class TestHarmonicFlatten:
    """Harmonic maps onto the unit disk."""

    def test_uniform_grid_has_no_flips(self, grid):
        sub = SubMesh.whole(grid)
        chart = harmonic_flatten(sub, FlattenWeights.UNIFORM)
        np.testing.assert_allclose(_on_unit_circle(chart), 1.0, atol=1e-12)
        assert flipped_triangles(chart, grid.faces).size == 0
        np.testing.assert_allclose(chart.uv[12], 0.0, atol=1e-8)

    def test_uniform_tooth_cap_has_no_flips(self, small_scan):
        sub = _tooth_cap(small_scan)
        chart = harmonic_flatten(sub, "uniform")
        assert flipped_triangles(chart, sub.mesh.faces).size == 0
        assert np.all(np.linalg.norm(chart.uv, axis=1) <= 1.0 + 1e-9)

    def test_cotangent_tooth_cap_is_harmonic(self, small_scan):
        sub = _tooth_cap(small_scan)
        chart = harmonic_flatten(sub)
        np.testing.assert_allclose(_on_unit_circle(chart), 1.0, atol=1e-9)
        assert laplacian_residual(sub, chart) <= 1e-9
        assert chart.residual <= 1e-10

    def test_not_a_disk(self):
        with pytest.raises(NotADiskError):
            harmonic_flatten(SubMesh.whole(icosphere(1)))


class TestBackproject:
    """Polygon selection on a chart."""

    def test_whole_disk_selects_every_vertex(self, small_scan):
        sub = _tooth_cap(small_scan)
        chart = harmonic_flatten(sub, FlattenWeights.UNIFORM)
        selected = backproject_polygon(sub, chart, WHOLE_DISK)
        assert selected.tolist() == np.sort(sub.parent_index_map).tolist()

    def test_half_plane(self, grid):
        sub = SubMesh.whole(grid)
        chart = harmonic_flatten(sub, FlattenWeights.UNIFORM)
        polygon = [(0.1, -2.0), (2.0, -2.0), (2.0, 2.0), (0.1, 2.0)]
        expected = np.flatnonzero(chart.uv[:, 0] >= 0.1)
        assert backproject_polygon(sub, chart, polygon).tolist() == expected.tolist()

    @pytest.mark.parametrize(
        "polygon",
        [
            [(0.0, 0.0), (1.0, 0.0)],
            [(0.0, 0.0), (1.0, 1.0), (1.0, 0.0), (0.0, 1.0)],
            [(0.0, 0.0), (1.0, 0.0), (float("nan"), 1.0)],
        ],
        ids=["too-few-points", "bowtie", "non-finite"],
    )
    def test_invalid_polygons(self, grid, polygon):
        sub = SubMesh.whole(grid)
        chart = harmonic_flatten(sub, FlattenWeights.UNIFORM)
        with pytest.raises(InvalidPolygonError):
            backproject_polygon(sub, chart, polygon)


class TestChartFile:
    def test_round_trip(self, grid):
        sub = SubMesh.whole(grid)
        chart = harmonic_flatten(sub, FlattenWeights.UNIFORM)
        again_sub, again_chart = chart_from_dict(json.loads(json.dumps(chart_to_dict(sub, chart))))
        assert again_sub.mesh == sub.mesh
        np.testing.assert_array_equal(again_chart.uv, chart.uv)
        np.testing.assert_array_equal(again_chart.boundary_loop, chart.boundary_loop)

    def test_malformed(self):
        with pytest.raises(ValueError, match="malformed"):
            chart_from_dict({"vertices": []})
