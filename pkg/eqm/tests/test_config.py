import json

import pytest

from eqm.config import PipelineConfig
from eqm.core.custom_exceptions import ConfigVersionError, UsageError
from eqm.schemas.model import EqmLevel


@pytest.fixture(autouse=True)
def isolated_environment(tmp_path, monkeypatch):
    """No stray .env file or EQM_* variables leak into these tests."""
    monkeypatch.chdir(tmp_path)
    for name in ("EQM_SEED", "EQM_THREADS", "EQM_LEVEL", "EQM_BASE_FOREST__N_TREES"):
        monkeypatch.delenv(name, raising=False)


def _write_config(path, **values):
    path.write_text(json.dumps({"config_version": 1, **values}), encoding="utf-8")
    return path


class TestPipelineConfig:
    def test_defaults(self) -> None:
        config = PipelineConfig.load()
        assert config.level == EqmLevel.NR
        assert config.two_stage is True
        assert config.norm.global_threshold == 0.8
        assert config.base_forest.n_trees == 300

    def test_environment_variables(self, monkeypatch) -> None:
        monkeypatch.setenv("EQM_SEED", "17")
        monkeypatch.setenv("EQM_BASE_FOREST__N_TREES", "25")
        config = PipelineConfig.load()
        assert config.seed == 17
        assert config.base_forest.n_trees == 25

    def test_explicit_values_beat_environment(self, monkeypatch, tmp_path) -> None:
        monkeypatch.setenv("EQM_SEED", "17")
        path = _write_config(tmp_path / "cfg.json", seed=4, level="fr")
        assert PipelineConfig.load(path).seed == 4
        assert PipelineConfig.load(path, seed=9).seed == 9
        assert PipelineConfig.load(path).level == EqmLevel.FR

    def test_unsupported_config_version(self, tmp_path) -> None:
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"config_version": 2}), encoding="utf-8")
        with pytest.raises(ConfigVersionError):
            PipelineConfig.load(path)

    def test_invalid_value_is_usage_error(self, tmp_path) -> None:
        path = _write_config(tmp_path / "cfg.json", threads=0)
        with pytest.raises(UsageError, match="threads"):
            PipelineConfig.load(path)

    def test_unreadable_file_is_usage_error(self, tmp_path) -> None:
        with pytest.raises(UsageError):
            PipelineConfig.load(tmp_path / "missing.json")

    def test_run_seed_reaches_forests_without_their_own(self, tmp_path) -> None:
        path = _write_config(tmp_path / "cfg.json", seed=21, residual_forest={"seed": 5, "n_trees": 10})
        base, residual = PipelineConfig.load(path).forest_params()
        assert base.seed == 21
        assert residual.seed == 5
        assert residual.n_trees == 10

    def test_echo_is_json_serializable(self) -> None:
        echo = PipelineConfig.load(seed=3).echo()
        assert json.loads(json.dumps(echo))["seed"] == 3
        assert echo["level"] == "nr"


def test_grid_search_config_shape(tmp_path):
    path = tmp_path / "grid.json"
    path.write_text(
        '{"config_version": 1, "seed": 7,\n'
        ' "base_forest": {"n_trees": 100, "min_samples_leaf": 3},\n'
        ' "residual_forest": {"n_trees": 100, "min_samples_leaf": 3, "mtry": null}}\n',
        encoding="utf-8",
    )
    config = PipelineConfig.load(path)
    assert config.base_forest.min_samples_leaf == 3
    assert config.residual_forest.mtry is None
    assert config.residual_forest.resolve_mtry(28) == 10
