from pathlib import Path

import pytest

from src.lib.core.config import Settings, get_settings
from src.lib.core.errors import ConfigError
from src.schemas.config import (
    GRID_PRESETS,
    TrainConfig,
    Variant,
    build_config,
    load_config,
)


def test_defaults():
    config = TrainConfig()
    assert config.variant is Variant.BASE
    assert config.max_doc_len is None
    assert config.reg.beta1 == config.beta1


def test_load_flat_yaml(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text("n_factors: 8\nvariant: no_offset\nlearning_rate: 0.01\n")
    config = load_config(path)
    assert config.n_factors == 8
    assert config.variant is Variant.NO_OFFSET
    assert config.learning_rate == 0.01


def test_empty_yaml_gives_defaults(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text("")
    assert load_config(path) == TrainConfig()


@pytest.mark.parametrize(
    "text",
    [
        "model:\n  n_factors: 8\n",
        "- 1\n- 2\n",
        "n_factors: [\n",
        "unknown_key: 1\n",
        "filter_width: 4\n",
        "variant: nothing\n",
        "n_factors: 0\n",
    ],
)
def test_invalid_yaml_is_a_config_error(tmp_path, text):
    path = tmp_path / "config.yaml"
    path.write_text(text)
    with pytest.raises(ConfigError):
        load_config(path)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.yaml")


def test_overrides_skip_none_and_revalidate():
    config = TrainConfig().with_overrides(seed=None, n_factors=4)
    assert config.seed == 0
    assert config.n_factors == 4
    with pytest.raises(ConfigError):
        config.with_overrides(batch_size=0)


def test_build_config_reports_usage_exit_code():
    with pytest.raises(ConfigError) as exc:
        build_config({"dropout": 1.5})
    assert exc.value.exit_code == 1


def test_grid_presets():
    assert GRID_PRESETS["full"].size == 400
    assert GRID_PRESETS["aspects"].n_aspects == [1, 2, 3, 4, 5]


def test_settings_from_environment(monkeypatch, tmp_path):
    monkeypatch.setenv("RPR_CACHE_DIR", str(tmp_path))
    get_settings.cache_clear()
    try:
        settings = get_settings()
        assert settings.cache_dir == Path(tmp_path)
        assert settings.corpus_dir("music") == Path(tmp_path) / "music" / "v1"
    finally:
        get_settings.cache_clear()


def test_settings_default_cache_dir(monkeypatch):
    monkeypatch.delenv("RPR_CACHE_DIR", raising=False)
    assert Settings().cache_dir == Path(".rpr-cache")
