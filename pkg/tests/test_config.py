"""Tests for run configuration resolution."""

import json

import pytest
from pydantic import ValidationError

from teethseg_bench.config import RunConfig, env_prefix, load_config
from teethseg_bench.metrics import TsaAveraging


class TestLoadConfig:
    """defaults < file < environment < flags."""

    def test_defaults(self):
        config = load_config(env={})
        assert config == RunConfig()
        assert config.solver_tolerance == 1e-10
        assert config.tsa_averaging is TsaAveraging.GT_ONLY

    def test_precedence(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"walker_beta": 2.0, "knn_k": 5, "island_min_faces": 4}))
        env = {"TEETHSEG_KNN_K": "7", "TEETHSEG_ISLAND_MIN_FACES": "6"}
        config = load_config(path, overrides={"island_min_faces": 9, "walker_beta": None}, env=env)
        assert config.walker_beta == 2.0
        assert config.knn_k == 7
        assert config.island_min_faces == 9

    def test_env_prefix_override(self):
        env = {"TEETHSEG_ENV_PREFIX": "BENCH_", "BENCH_TSA_AVERAGING": "symmetric", "TEETHSEG_KNN_K": "9"}
        assert env_prefix(env) == "BENCH"
        config = load_config(env=env)
        assert config.tsa_averaging is TsaAveraging.SYMMETRIC
        assert config.knn_k == 3

    def test_blank_env_values_are_ignored(self):
        assert load_config(env={"TEETHSEG_KNN_K": "  "}).knn_k == 3

    @pytest.mark.parametrize(
        "values",
        [{"unknown": 1}, {"iou_threshold": 1.5}, {"solver_tolerance": 0}, {"size_definition": "volume"}],
        ids=["unknown-key", "iou-range", "tolerance", "enum"],
    )
    def test_rejects_invalid_values(self, values):
        with pytest.raises(ValidationError):
            load_config(overrides=values, env={})

    def test_missing_file(self, tmp_path):
        with pytest.raises(ValueError, match="cannot read"):
            load_config(tmp_path / "absent.json", env={})

    def test_file_must_hold_an_object(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text("[1, 2]")
        with pytest.raises(ValueError, match="JSON object"):
            load_config(path, env={})


class TestRunConfig:
    def test_workers_are_not_echoed(self):
        assert "workers" not in RunConfig(workers=2).to_dict()

    def test_effective_workers(self):
        assert RunConfig(workers=3).effective_workers() == 3
        assert RunConfig().effective_workers() >= 1

    def test_is_frozen(self):
        with pytest.raises(ValidationError):
            RunConfig().knn_k = 4  # type: ignore[misc]
