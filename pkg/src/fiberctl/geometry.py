"""Physical description of the robotic fiber and its safety envelope.

All lengths are millimetres, angles radians, powers watts, temperatures
degrees Celsius. Instances are frozen and safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError

TWO_PI = 2.0 * math.pi

# Actuator triads sit at 0/120/240 degrees around the cross-section.
TRIAD_ANGLES = (0.0, TWO_PI / 3.0, 2.0 * TWO_PI / 3.0)


@dataclass(frozen=True)
class FiberGeometry:
    """Immutable geometry of the hybrid-actuated fiber.

    The distal 80 mm (70 mm electrothermal section plus a 10 mm transition)
    is modelled as a rigid straight extension tangent to the bending tendon
    section; everything distal of the tendon anchor stays straight.
    """

    total_length: float = 150.0
    diameter: float = 1.7
    thermal_section_length: float = 70.0
    tendon_anchor_from_tip: float = 80.0
    bend_section_length: float = 70.0
    tendon_angles: tuple[float, float, float] = TRIAD_ANGLES
    heater_angles: tuple[float, float, float] = TRIAD_ANGLES
    # Effective tendon moment arm: calibrated, absorbs tendon elasticity and
    # sheath slack, so it exceeds the geometric pitch radius.
    moment_arm: float = 2.2
    laser_channel_diameter: float = 0.9

    def __post_init__(self) -> None:
        lengths = {
            "total_length": self.total_length,
            "diameter": self.diameter,
            "thermal_section_length": self.thermal_section_length,
            "tendon_anchor_from_tip": self.tendon_anchor_from_tip,
            "bend_section_length": self.bend_section_length,
            "moment_arm": self.moment_arm,
            "laser_channel_diameter": self.laser_channel_diameter,
        }
        for name, value in lengths.items():
            if not (value > 0.0) or not math.isfinite(value):
                raise ConfigError(f"{name} must be positive, got {value!r}")
        if abs(self.bend_section_length + self.tendon_anchor_from_tip
               - self.total_length) > 1e-9:
            raise ConfigError(
                "bend_section_length + tendon_anchor_from_tip must equal "
                f"total_length ({self.bend_section_length} + "
                f"{self.tendon_anchor_from_tip} != {self.total_length})")
        if self.thermal_section_length > self.tendon_anchor_from_tip + 1e-9:
            raise ConfigError(
                "thermal_section_length must not exceed tendon_anchor_from_tip")
        for name, angles in (("tendon_angles", self.tendon_angles),
                             ("heater_angles", self.heater_angles)):
            if len(angles) != 3:
                raise ConfigError(f"{name} must have exactly 3 entries")
            wrapped = sorted(a % TWO_PI for a in angles)
            gaps = [wrapped[1] - wrapped[0], wrapped[2] - wrapped[1],
                    wrapped[0] + TWO_PI - wrapped[2]]
            if min(gaps) < 1e-9:
                raise ConfigError(f"{name} must be distinct modulo 2*pi")


@dataclass(frozen=True)
class SafetyLimits:
    """Hard operating limits enforced before any command reaches the twin."""

    max_channel_power: float = 0.8
    max_temperature: float = 75.0
    max_tendon_pull: float = 0.9
    # Kinematic validity headroom above the calibrated full-range bend
    # (~0.41 rad); in practice the tendon pull limit binds first.
    max_bend_angle: float = 0.6

    def __post_init__(self) -> None:
        for name in ("max_channel_power", "max_temperature",
                     "max_tendon_pull", "max_bend_angle"):
            value = getattr(self, name)
            if not (value > 0.0) or not math.isfinite(value):
                raise ConfigError(f"{name} must be positive, got {value!r}")
