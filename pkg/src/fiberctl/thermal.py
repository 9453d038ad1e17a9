"""Electrothermal section model.

Steady-state tip deflection is the power-weighted vector sum over the three
heating-wire pairs, u = alpha * sum_i p_i * (cos a_i, sin a_i), so the
reachable set under per-channel power caps is the Minkowski sum of three
segments: a hexagon. Dynamics are a first-order lag toward the steady state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, OutsideWorkspace, PowerLimitExceeded
from .geometry import TRIAD_ANGLES, SafetyLimits

# Boundary tolerance for hexagon membership, in mm of perpendicular distance.
BOUNDARY_TOL = 1e-9


@dataclass(frozen=True)
class ThermalParams:
    """Calibrated lumped constants of the electrothermal section.

    alpha anchors 1.95 mm of deflection at the 0.8 W linear-regime cap;
    temp_coefficient anchors a 75 degC peak at that same cap above a 22 degC
    ambient. supply_resistance only matters for voltage-level interfaces.
    """

    alpha: float = 2.4375
    time_constant: float = 20.0
    ambient_temperature: float = 22.0
    temp_coefficient: float = 66.25
    supply_resistance: float = 100.0

    def __post_init__(self) -> None:
        if not (self.alpha > 0.0):
            raise ConfigError(f"alpha must be positive, got {self.alpha!r}")
        if not (self.time_constant > 0.0):
            raise ConfigError("time_constant must be positive")
        if self.temp_coefficient < 0.0:
            raise ConfigError("temp_coefficient must be nonnegative")
        if not (self.supply_resistance > 0.0):
            raise ConfigError("supply_resistance must be positive")


@dataclass(frozen=True)
class PowerCommand:
    """Per-channel electrical powers in watts. Nonnegative by construction."""

    p: tuple[float, float, float]

    def __post_init__(self) -> None:
        if len(self.p) != 3:
            raise PowerLimitExceeded("power command needs exactly 3 channels")
        for i, value in enumerate(self.p):
            if not math.isfinite(value) or value < 0.0:
                raise PowerLimitExceeded(
                    f"channel {i} power must be finite and >= 0, got {value!r}")

    @classmethod
    def checked(cls, powers, limits: SafetyLimits) -> "PowerCommand":
        """Construct a command, enforcing the per-channel cap. No clamping."""
        cmd = cls(tuple(float(v) for v in powers))
        for i, value in enumerate(cmd.p):
            if value > limits.max_channel_power + 1e-12:
                raise PowerLimitExceeded(
                    f"channel {i} power {value:.6g} W exceeds cap "
                    f"{limits.max_channel_power:.6g} W")
        return cmd

    @classmethod
    def zero(cls) -> "PowerCommand":
        return cls((0.0, 0.0, 0.0))


@dataclass(frozen=True)
class ThermalState:
    """Lagged deflection (mm, tip cross-section frame) and peak surface
    temperature (degC)."""

    deflection: tuple[float, float] = (0.0, 0.0)
    peak_temperature: float = 22.0

    @classmethod
    def at_rest(cls, params: ThermalParams) -> "ThermalState":
        return cls((0.0, 0.0), params.ambient_temperature)


def heater_units(heater_angles=TRIAD_ANGLES) -> np.ndarray:
    """Unit bending-direction vectors of the three wire pairs, shape (3, 2)."""
    a = np.asarray(heater_angles, dtype=float)
    return np.stack([np.cos(a), np.sin(a)], axis=1)


def steady_state_deflection(params: ThermalParams, cmd: PowerCommand,
                            heater_angles=TRIAD_ANGLES) -> np.ndarray:
    """Steady-state deflection u = alpha * sum_i p_i * e_i, in mm."""
    return params.alpha * (np.asarray(cmd.p, dtype=float) @ heater_units(heater_angles))


class Workspace:
    """Reachable steady-state deflection set with cached hexagon geometry."""

    def __init__(self, params: ThermalParams, limits: SafetyLimits,
                 heater_angles=TRIAD_ANGLES):
        self.params = params
        self.limits = limits
        self.heater_angles = tuple(heater_angles)
        self.vertices = _minkowski_vertices(params, limits, heater_angles)
        rolled = np.roll(self.vertices, -1, axis=0)
        edges = rolled - self.vertices
        lengths = np.hypot(edges[:, 0], edges[:, 1])
        # Inward unit normals of each edge (vertices are CCW).
        self._normals = np.stack([-edges[:, 1], edges[:, 0]], axis=1) / lengths[:, None]
        self._offsets = np.einsum("ij,ij->i", self._normals, self.vertices)

    def contains(self, point) -> bool:
        return bool(self.contains_points(np.asarray(point, dtype=float)[None, :])[0])

    def contains_points(self, points: np.ndarray) -> np.ndarray:
        """Vectorised closed membership test, (N, 2) -> (N,) bool."""
        d = points @ self._normals.T - self._offsets
        return np.all(d >= -BOUNDARY_TOL, axis=1)

    def clip_segment(self, a, b):
        """Intersect segment a-b with the hexagon.

        Returns (t0, t1) parameters in [0, 1] of the surviving sub-segment,
        or None when the segment misses the workspace entirely.
        """
        a = np.asarray(a, dtype=float)
        d = np.asarray(b, dtype=float) - a
        t0, t1 = 0.0, 1.0
        for n, off in zip(self._normals, self._offsets):
            denom = float(n @ d)
            dist = float(n @ a) - off
            if abs(denom) < 1e-15:
                if dist < -BOUNDARY_TOL:
                    return None
                continue
            t_hit = -dist / denom
            if denom > 0.0:
                t0 = max(t0, t_hit)
            else:
                t1 = min(t1, t_hit)
            if t0 > t1:
                return None
        return (t0, t1)


def _minkowski_vertices(params: ThermalParams, limits: SafetyLimits,
                        heater_angles) -> np.ndarray:
    """CCW hull of all subset sums of the three power segments.

    For the default 120-degree triad this is the regular hexagon with
    circumradius alpha*p_max and vertices at 0, 60, ..., 300 degrees.
    """
    gens = params.alpha * limits.max_channel_power * heater_units(heater_angles)
    sums = np.array([sum((gens[i] for i in range(3) if mask & (1 << i)),
                         start=np.zeros(2)) for mask in range(8)])
    return _convex_hull(sums)


def _convex_hull(points: np.ndarray) -> np.ndarray:
    """Andrew monotone chain; CCW vertices, first vertex at smallest angle."""
    pts = np.unique(points.round(12), axis=0)
    pts = pts[np.lexsort((pts[:, 1], pts[:, 0]))]
    if len(pts) <= 2:
        return pts

    def chain(seq):
        out: list[np.ndarray] = []
        for p in seq:
            while len(out) >= 2:
                u, v = out[-1] - out[-2], p - out[-2]
                if u[0] * v[1] - u[1] * v[0] > 0.0:
                    break
                out.pop()
            out.append(p)
        return out

    lower = chain(pts)
    upper = chain(pts[::-1])
    hull = np.array(lower[:-1] + upper[:-1])
    angles = np.arctan2(hull[:, 1], hull[:, 0]) % (2.0 * np.pi)
    return np.roll(hull, -int(np.argmin(angles)), axis=0)


def workspace_vertices(params: ThermalParams, limits: SafetyLimits,
                       heater_angles=TRIAD_ANGLES) -> np.ndarray:
    return Workspace(params, limits, heater_angles).vertices


def workspace_contains(params: ThermalParams, limits: SafetyLimits, point,
                       heater_angles=TRIAD_ANGLES) -> bool:
    return Workspace(params, limits, heater_angles).contains(point)


def allocate_powers(params: ThermalParams, target, limits: SafetyLimits,
                    heater_angles=TRIAD_ANGLES) -> PowerCommand:
    """Minimum-total-power command reaching `target` at steady state.

    Solutions form the family p0 + c*(1,1,1) because the triad sums to zero;
    minimising total power drives the slack channel to zero, leaving at most
    two angularly adjacent channels active.
    """
    t = np.asarray(target, dtype=float) / params.alpha
    units = heater_units(heater_angles)
    order = np.argsort(np.asarray(heater_angles) % (2.0 * np.pi))

    best: tuple[float, float, np.ndarray] | None = None
    for k in range(3):
        i, j = int(order[k]), int(order[(k + 1) % 3])
        ei, ej = units[i], units[j]
        det = ei[0] * ej[1] - ei[1] * ej[0]
        if abs(det) < 1e-12:
            continue
        a = (t[0] * ej[1] - t[1] * ej[0]) / det
        b = (ei[0] * t[1] - ei[1] * t[0]) / det
        if a < -BOUNDARY_TOL or b < -BOUNDARY_TOL:
            continue
        p = np.zeros(3)
        p[i], p[j] = max(a, 0.0), max(b, 0.0)
        # Clipping a tolerance-level negative leaves a residual; rank by
        # residual first or a clipped near-miss can shadow the exact pair
        # (a target on a heater axis solves as -eps on the opposite pair,
        # which would clip to an all-zero "cheapest" command).
        resid = float(np.linalg.norm(p[i] * ei + p[j] * ej - t))
        if best is None or (resid, p.sum()) < best[:2]:
            best = (resid, float(p.sum()), p)
    if best is None:
        raise OutsideWorkspace(
            f"target {tuple(np.round(target, 6))} mm is outside the "
            "reachable hexagon")
    powers = best[2]
    if np.any(powers > limits.max_channel_power + BOUNDARY_TOL):
        raise OutsideWorkspace(
            f"target needs {powers.max():.6g} W on one channel, above the "
            f"{limits.max_channel_power:.6g} W cap")
    return PowerCommand.checked(np.minimum(powers, limits.max_channel_power),
                                limits)


def step_dynamics(params: ThermalParams, state: ThermalState,
                  cmd: PowerCommand, dt: float,
                  heater_angles=TRIAD_ANGLES) -> ThermalState:
    """Advance deflection and temperature by one first-order-lag step.

    x <- x + (x_ss - x) * (1 - exp(-dt/tau)); the exact exponential update,
    so composing two dt steps equals one 2*dt step to machine precision.
    """
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    k = 1.0 - math.exp(-dt / params.time_constant)
    u_ss = steady_state_deflection(params, cmd, heater_angles)
    u = np.asarray(state.deflection, dtype=float)
    u_next = u + (u_ss - u) * k
    t_ss = peak_temperature_ss(params, cmd)
    t_next = state.peak_temperature + (t_ss - state.peak_temperature) * k
    return ThermalState((float(u_next[0]), float(u_next[1])), float(t_next))


def peak_temperature_ss(params: ThermalParams, cmd: PowerCommand) -> float:
    """Steady-state peak surface temperature; the hottest single wire pair
    dominates because each pair heats its own side of the cross-section."""
    return params.ambient_temperature + params.temp_coefficient * max(cmd.p)


def power_from_voltage(params: ThermalParams, volts,
                       limits: SafetyLimits) -> PowerCommand:
    """Map per-channel voltages to powers via p = v^2 / R."""
    v = np.asarray(volts, dtype=float)
    if np.any(v < 0.0):
        raise PowerLimitExceeded("voltages must be nonnegative")
    return PowerCommand.checked(v * v / params.supply_resistance, limits)
