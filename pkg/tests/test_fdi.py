"""Tests for FDI numbering helpers."""

import pytest

from teethseg_bench.fdi import (
    Jaw,
    arch_sequence,
    class7_to_fdi,
    fdi_to_class7,
    is_valid_fdi,
    jaw_of,
    position,
    quadrant,
)


class TestFdiCodes:
    """Code validity and decomposition."""

    @pytest.mark.parametrize("code", [11, 18, 21, 28, 31, 38, 41, 48])
    def test_valid_codes(self, code):
        assert is_valid_fdi(code)

    @pytest.mark.parametrize("code", [0, 10, 19, 50, 9, 51, 100, -11])
    def test_invalid_codes(self, code):
        assert not is_valid_fdi(code)

    def test_quadrant_and_position(self):
        assert quadrant(36) == 3
        assert position(36) == 6

    def test_jaw_of(self):
        assert jaw_of(14) is Jaw.UPPER
        assert jaw_of(25) is Jaw.UPPER
        assert jaw_of(33) is Jaw.LOWER
        assert jaw_of(47) is Jaw.LOWER
        assert jaw_of(0) is None


class TestArchSequence:
    """Expected label order along the arch."""

    def test_upper(self):
        seq = arch_sequence(Jaw.UPPER)
        assert seq[:8] == (18, 17, 16, 15, 14, 13, 12, 11)
        assert seq[8:] == (21, 22, 23, 24, 25, 26, 27, 28)

    def test_lower_from_string(self):
        seq = arch_sequence("lower")
        assert seq[0] == 48
        assert seq[7] == 41
        assert seq[8] == 31
        assert seq[-1] == 38


class TestClassMapping:
    """Seven-class position encoding and its inverse."""

    @pytest.mark.parametrize("code,expected", [(11, 1), (23, 3), (36, 6), (47, 7), (18, 7), (38, 7)])
    def test_fdi_to_class7(self, code, expected):
        assert fdi_to_class7(code) == expected

    def test_fdi_to_class7_rejects_gingiva(self):
        with pytest.raises(ValueError):
            fdi_to_class7(0)

    def test_sides_split_at_incisor_midline(self):
        centroids = [(-4.0, 0, 0), (-1.0, 0, 0), (1.5, 0, 0), (5.0, 0, 0)]
        labels = class7_to_fdi(centroids, [2, 1, 1, 2], Jaw.UPPER)
        assert labels == [12, 11, 21, 22]

    def test_second_class7_on_a_side_becomes_third_molar(self):
        centroids = [(-40.0, 0, 0), (-30.0, 0, 0), (-1.0, 0, 0), (1.0, 0, 0)]
        labels = class7_to_fdi(centroids, [7, 7, 1, 1], Jaw.LOWER)
        assert labels == [48, 47, 41, 31]

    def test_midline_defaults_to_zero_without_incisors(self):
        labels = class7_to_fdi([(-3.0, 0, 0), (3.0, 0, 0)], [4, 4], "upper")
        assert labels == [14, 24]

    def test_rejects_out_of_range_class(self):
        with pytest.raises(ValueError, match="class must be in 1..7"):
            class7_to_fdi([(0.0, 0, 0)], [8], Jaw.UPPER)
