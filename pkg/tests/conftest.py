"""Pytest configuration and fixtures for tests."""

import pytest

from teethseg_bench.fdi import Jaw
from teethseg_bench.synthgen import SynthConfig, generate_jaw
from tests.mesh_fixtures import face_strip, grid_mesh


def pytest_configure(config):
    """Register custom markers."""
    config.addinivalue_line("markers", "slow: marks acceptance-scale suites (deselect with '-m \"not slow\"')")
    config.addinivalue_line("markers", "unit: marks tests as unit tests (select with '-m unit')")


@pytest.fixture(autouse=True)
def _isolated_environment(monkeypatch):
    """Keep developer settings out of the tests."""
    monkeypatch.delenv("TEETHSEG_STATS_ENABLED", raising=False)
    monkeypatch.delenv("TEETHSEG_ENV_PREFIX", raising=False)


@pytest.fixture
def small_scan():
    """Four-tooth upper jaw at the default subdivision level."""
    return generate_jaw(SynthConfig(patient_id="fixture", tooth_count=4, seed=7))


@pytest.fixture(scope="session")
def full_scan():
    """Fourteen-tooth upper jaw, shared across the session."""
    return generate_jaw(SynthConfig(patient_id="full", tooth_count=14, seed=3))


@pytest.fixture
def lower_scan():
    return generate_jaw(SynthConfig(patient_id="lower", jaw=Jaw.LOWER, tooth_count=6, seed=11))


@pytest.fixture
def strip():
    """Five faces whose edge adjacency is a path."""
    return face_strip()


@pytest.fixture
def grid():
    """Flat 5 x 5 vertex grid in the xy plane, faces oriented towards +z."""
    return grid_mesh(5, 5)
