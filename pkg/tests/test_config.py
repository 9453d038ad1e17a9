"""Flat YAML config: mapping round trips, typo rejection, regime warning."""

import pytest

from fiberctl import ConfigError
from fiberctl.config import (config_from_mapping, config_to_mapping,
                             default_config, load_config, save_config)


def test_mapping_roundtrip_is_identity():
    cfg = default_config()
    assert config_from_mapping(config_to_mapping(cfg)) == cfg


def test_save_load_roundtrip(tmp_path):
    cfg = default_config()
    path = tmp_path / "robot.yaml"
    save_config(cfg, path)
    assert load_config(path) == cfg


def test_single_key_overrides_one_field():
    cfg = config_from_mapping({"moment_arm_mm": 2.3})
    assert cfg.geometry.moment_arm == 2.3
    base = default_config()
    assert cfg.limits == base.limits
    assert cfg.thermal == base.thermal
    assert cfg.scan == base.scan


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="unknown config keys: moment_arm"):
        config_from_mapping({"moment_arm": 2.3})


def test_non_numeric_value_rejected():
    with pytest.raises(ConfigError, match="must be a number"):
        config_from_mapping({"moment_arm_mm": "wide"})
    # bool is an int subclass but never a sane physical quantity
    with pytest.raises(ConfigError, match="must be a number"):
        config_from_mapping({"moment_arm_mm": True})


def test_angle_lists_become_tuples():
    cfg = config_from_mapping({"heater_angles_rad": [0.0, 2.0, 4.0]})
    assert cfg.geometry.heater_angles == (0.0, 2.0, 4.0)
    assert isinstance(cfg.geometry.heater_angles, tuple)


def test_power_above_linear_regime_warns():
    with pytest.warns(RuntimeWarning, match="linear deflection regime"):
        cfg = config_from_mapping({"max_channel_power_w": 1.2})
    assert cfg.limits.max_channel_power == 1.2


def test_missing_path_and_empty_file_give_defaults(tmp_path):
    assert load_config(None) == default_config()
    empty = tmp_path / "empty.yaml"
    empty.write_text("")
    assert load_config(empty) == default_config()
