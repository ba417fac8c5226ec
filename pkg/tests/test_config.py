import json

import pytest

from pinnbarrier.config import SCHEMA_VERSION, ConfigError, ExperimentConfig, config_from_dict, load_config
from pinnbarrier.optim import Schedule


def test_defaults_validate_and_round_trip(tmp_path):
    cfg = ExperimentConfig().validate()
    path = tmp_path / "c.json"
    path.write_text(cfg.dumps())
    again = load_config(path)
    assert again.dumps() == cfg.dumps()
    assert json.loads(cfg.dumps())["schema_version"] == SCHEMA_VERSION


def test_schedule_overrides():
    cfg = config_from_dict({"schema_version": 1, "schedule": {"lbfgs_epochs": 7}})
    assert cfg.schedule_obj() == Schedule(50, 2000, 7, 500, 60)
    cfg = config_from_dict({"schema_version": 1, "mode": "parametric"})
    assert cfg.schedule_obj() == Schedule.preset("parametric")
    assert cfg.layer_sizes()[0] == 2


@pytest.mark.parametrize("bad", [
    {},
    {"schema_version": 2},
    {"schema_version": 1, "colour": "red"},
    {"schema_version": 1, "mode": "transient"},
    {"schema_version": 1, "tag": "C9"},
    {"schema_version": 1, "weighting": "fixed", "alpha": 2.0},
    {"schema_version": 1, "weighting": "gradnorm"},
    {"schema_version": 1, "preset": "huge"},
    {"schema_version": 1, "alphas": []},
    {"schema_version": 1, "log_base": "base2"},
    {"schema_version": 1, "fd": {"method": "spectral"}},
    {"schema_version": 1, "fd": {"cfl": -1}},
    {"schema_version": 1, "adamw": {"momentum": 0.9}},
    {"schema_version": 1, "schedule": {"epochs": 3}},
    {"schema_version": 1, "schedule": {"batch_size": 0}},
    {"schema_version": 1, "workers": 0},
    [1, 2],
])
def test_invalid_configs(bad):
    with pytest.raises(ConfigError):
        config_from_dict(bad)


def test_invalid_json(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(p)
    with pytest.raises(FileNotFoundError):
        load_config(tmp_path / "absent.json")


def test_tag_normalized():
    assert config_from_dict({"schema_version": 1, "tag": "analytical"}).tag == "Analytical"
