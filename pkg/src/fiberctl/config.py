"""Flat YAML configuration for the robot model.

Every key is unit-suffixed and maps onto one field of the geometry, limit,
thermal or scan dataclasses. Unknown keys are rejected rather than ignored:
a typo in a tuning file should fail loudly, not silently run defaults.
"""

from __future__ import annotations

import warnings
from typing import NamedTuple

import yaml

from .errors import ConfigError
from .geometry import FiberGeometry, SafetyLimits
from .planner import ScanParams
from .thermal import ThermalParams

# Deflection-vs-power was validated linear only up to this drive level.
LINEAR_REGIME_W = 0.8


class RobotConfig(NamedTuple):
    geometry: FiberGeometry
    limits: SafetyLimits
    thermal: ThermalParams
    scan: ScanParams


# key -> (section, field). Angle lists convert to tuples on load.
_KEYMAP = {
    "total_length_mm": ("geometry", "total_length"),
    "diameter_mm": ("geometry", "diameter"),
    "thermal_section_length_mm": ("geometry", "thermal_section_length"),
    "tendon_anchor_from_tip_mm": ("geometry", "tendon_anchor_from_tip"),
    "bend_section_length_mm": ("geometry", "bend_section_length"),
    "tendon_angles_rad": ("geometry", "tendon_angles"),
    "heater_angles_rad": ("geometry", "heater_angles"),
    "moment_arm_mm": ("geometry", "moment_arm"),
    "laser_channel_diameter_mm": ("geometry", "laser_channel_diameter"),
    "max_channel_power_w": ("limits", "max_channel_power"),
    "max_temperature_c": ("limits", "max_temperature"),
    "max_tendon_pull_mm": ("limits", "max_tendon_pull"),
    "max_bend_angle_rad": ("limits", "max_bend_angle"),
    "alpha_mm_per_w": ("thermal", "alpha"),
    "time_constant_s": ("thermal", "time_constant"),
    "ambient_temperature_c": ("thermal", "ambient_temperature"),
    "temp_coefficient_c_per_w": ("thermal", "temp_coefficient"),
    "supply_resistance_ohm": ("thermal", "supply_resistance"),
    "spot_radius_mm": ("scan", "spot_radius"),
    "raster_pitch_mm": ("scan", "raster_pitch"),
    "stroke_speed_mm_s": ("scan", "stroke_speed"),
    "settle_tolerance_mm": ("scan", "settle_tolerance"),
    "coverage_grid_mm": ("scan", "coverage_grid"),
}

_SECTIONS = {"geometry": FiberGeometry, "limits": SafetyLimits,
             "thermal": ThermalParams, "scan": ScanParams}


def default_config() -> RobotConfig:
    return RobotConfig(FiberGeometry(), SafetyLimits(), ThermalParams(),
                       ScanParams())


def config_from_mapping(data: dict) -> RobotConfig:
    """Build a config from a flat key/value mapping over defaults."""
    if not isinstance(data, dict):
        raise ConfigError(f"config root must be a mapping, got {type(data)!r}")
    unknown = sorted(set(data) - set(_KEYMAP))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    fields: dict[str, dict] = {name: {} for name in _SECTIONS}
    for key, value in data.items():
        section, attr = _KEYMAP[key]
        if isinstance(value, (list, tuple)):
            value = tuple(float(v) for v in value)
        elif isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key} must be a number or list, got {value!r}")
        else:
            value = float(value)
        fields[section][attr] = value
    try:
        parts = {name: cls(**fields[name]) for name, cls in _SECTIONS.items()}
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    cfg = RobotConfig(**parts)
    if cfg.limits.max_channel_power > LINEAR_REGIME_W + 1e-12:
        warnings.warn(
            f"max_channel_power_w = {cfg.limits.max_channel_power:g} is above "
            f"the {LINEAR_REGIME_W:g} W linear deflection regime; the "
            "proportional actuation model is unvalidated there",
            RuntimeWarning, stacklevel=3)
    return cfg


def load_config(path=None) -> RobotConfig:
    """Load a YAML config file; with no path, return the defaults."""
    if path is None:
        return default_config()
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    if data is None:
        data = {}
    return config_from_mapping(data)


def config_to_mapping(cfg: RobotConfig) -> dict:
    """Flat mapping with every key explicit; inverse of config_from_mapping."""
    out = {}
    for key, (section, attr) in _KEYMAP.items():
        value = getattr(getattr(cfg, section), attr)
        out[key] = list(value) if isinstance(value, tuple) else value
    return out


def save_config(cfg: RobotConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(config_to_mapping(cfg), fh, sort_keys=True)
