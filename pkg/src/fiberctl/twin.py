"""Digital twin: quasi-static tendon bend, lagged electrothermal deflection,
laser spot accounting on a target plane.

The tendon loop is orders of magnitude faster than the thermal loop, so bend
commands take effect within one tick while the thermal deflection relaxes
exponentially toward its commanded steady state. Achieved deflection carries
a zero-mean Gaussian output disturbance; executors' settle logic reads the
disturbance-free state, mirroring a controller that filters its sensor.

Frames: internally everything lives in the fiber-base frame (+z along the
rest axis, base at the origin). Telemetry reports tip positions in the world
frame, where the tip of the straight fiber sits at z = insertion depth and
the target plane at z = insertion depth + standoff. Plane (x, y) coordinates
are identical in both frames.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .config import RobotConfig, default_config
from .errors import (InterlockViolation, NoIntersection, OutsideWorkspace,
                     TargetOutOfReach)
from .geometry import TWO_PI
from .kinematics import (BendState, TipPose, forward_kinematics,
                         max_bend_angle, pulls_from_bend)
from .planner import RasterPath, ScanPlan
from .thermal import (PowerCommand, ThermalState, Workspace, allocate_powers,
                      step_dynamics)

IK_TOL = 1e-6
IK_MAX_ITER = 200

# Achieved-deflection output disturbance, mm (1-sigma per axis).
DEFAULT_NOISE_SIGMA = 0.02

# Fine targets may overshoot the hexagon by this fraction before they are
# rejected instead of scaled back onto the boundary. Legitimate overshoot
# comes from planning strokes in plane coordinates while the workspace is
# polygonal in deflection coordinates; the mismatch grows like bend^2 and
# stays well under this bound over the operating range.
FINE_OVERSHOOT_FRAC = 0.05

SEED_ENV_VAR = "FIBERCTL_SEED"

# Session modes the twin stamps into telemetry. The gating table itself
# lives in the protocol fixture; the twin only knows the names because the
# laser interlock needs one of them.
MODE_IDLE = "IDLE"
MODE_COARSE_NAV = "COARSE_NAV"
MODE_SETTLED = "SETTLED"
MODE_SCANNING = "SCANNING"


@dataclass(frozen=True)
class Scene:
    """Where the fiber sits relative to the tissue."""

    standoff: float = 2.0
    insertion_depth: float = 120.0

    def plane_z(self, total_length: float) -> float:
        """Target plane position in the fiber-base frame."""
        return total_length + self.standoff

    def __post_init__(self) -> None:
        if not (self.standoff > 0.0):
            raise ValueError("standoff must be positive")


def project_tip_to_plane(pose: TipPose, plane_z: float) -> np.ndarray:
    """Pierce point of the tip laser ray on the plane z = plane_z, mm."""
    o = np.asarray(pose.position)
    d = np.asarray(pose.tangent)
    if d[2] <= 1e-9:
        raise NoIntersection("tip points away from the target plane")
    t = (plane_z - o[2]) / d[2]
    if t < 0.0:
        raise NoIntersection("tip sits beyond the target plane")
    return o[:2] + t * d[:2]


def plane_radius_profile(geom, bend_theta: float, plane_z: float) -> float:
    """Radial plane coordinate reached at bend angle theta (phi = 0)."""
    pose = forward_kinematics(geom, BendState(bend_theta, 0.0))
    return float(project_tip_to_plane(pose, plane_z)[0])


def plane_ik(geom, limits, target_xy, plane_z: float) -> BendState:
    """Bend state whose laser ray pierces the plane at target_xy.

    Same monotone-bisection structure as the tip-space inverse; the profile
    r(theta) grows strictly because the lateral offset and the tangent tilt
    increase together over the operating range.
    """
    x, y = float(target_xy[0]), float(target_xy[1])
    r_target = math.hypot(x, y)
    if r_target < IK_TOL:
        return BendState(0.0, 0.0)
    theta_hi = max_bend_angle(geom, limits)
    r_max = plane_radius_profile(geom, theta_hi, plane_z)
    if r_target > r_max + IK_TOL:
        raise TargetOutOfReach(
            f"plane radius {r_target:.4f} mm exceeds reach {r_max:.4f} mm")
    phi = math.atan2(y, x) % TWO_PI
    lo, hi = 0.0, theta_hi
    for _ in range(IK_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if plane_radius_profile(geom, mid, plane_z) < r_target:
            lo = mid
        else:
            hi = mid
        if hi - lo < IK_TOL / (10.0 * plane_z):
            break
    return BendState(0.5 * (lo + hi), phi)


def plane_affine(geom, bend: BendState, plane_z: float):
    """Affine map from cross-section deflection u to plane point, p = p0 + A u.

    Thermal deflection translates the tip without tilting it, so the pierce
    point moves linearly: each material basis vector e_k maps to its world
    offset w_k minus the along-ray correction w_k_z * (d_xy / d_z).
    """
    pose0 = forward_kinematics(geom, bend)
    p0 = project_tip_to_plane(pose0, plane_z)
    d = np.asarray(pose0.tangent)
    slope = d[:2] / d[2]
    cols = []
    for e in ((1.0, 0.0), (0.0, 1.0)):
        pose_e = forward_kinematics(geom, bend, e)
        w = np.asarray(pose_e.position) - np.asarray(pose0.position)
        cols.append(w[:2] - w[2] * slope)
    return p0, np.stack(cols, axis=1)


@dataclass
class TelemetryRecord:
    """One tick of observable state. Serialises to a flat JSON object."""

    t: float
    tip: tuple[float, float, float]
    plane_point: tuple[float, float] | None
    bend: tuple[float, float]
    powers: tuple[float, float, float]
    peak_temperature: float
    laser_on: bool
    mode: str
    scan_pass_index: int
    pulls: tuple[float, float, float]
    deflection: tuple[float, float]
    n_spots: int
    new_spots: list[tuple[float, float, float]]

    def to_dict(self) -> dict:
        d = self.__dict__.copy()
        for key in ("tip", "bend", "powers", "pulls", "deflection"):
            d[key] = list(d[key])
        d["plane_point"] = (None if self.plane_point is None
                            else list(self.plane_point))
        d["new_spots"] = [list(s) for s in self.new_spots]
        return d


class Twin:
    """Simulated fiber: advance with tick(), drive with the command methods."""

    def __init__(self, config: RobotConfig | None = None,
                 scene: Scene | None = None, seed: int | None = None,
                 dt: float = 0.05, noise_sigma: float = DEFAULT_NOISE_SIGMA,
                 telemetry_stride: int = 1):
        self.config = config or default_config()
        self.scene = scene or Scene()
        if seed is None:
            seed = int(os.environ.get(SEED_ENV_VAR, "0"))
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        if not 0.0 < dt <= 0.5:
            raise ValueError(f"dt must be in (0, 0.5] s, got {dt!r}")
        self.dt = dt
        self.noise_sigma = noise_sigma
        self.telemetry_stride = max(1, int(telemetry_stride))

        g, lim, th = self.config.geometry, self.config.limits, self.config.thermal
        self.plane_z = self.scene.plane_z(g.total_length)
        self.workspace = Workspace(th, lim, g.heater_angles)

        self.time = 0.0
        self.bend = BendState(0.0, 0.0)
        self.power_cmd = PowerCommand.zero()
        self.thermal_state = ThermalState.at_rest(th)
        self.max_temperature = th.ambient_temperature
        self.insertion_depth = self.scene.insertion_depth
        self.laser_on = False
        self.mode = MODE_IDLE
        self.scan_pass_index = 0
        self.spots: list[tuple[float, float, float]] = []
        self.records: list[TelemetryRecord] = []
        self._tick_count = 0
        self._spots_recorded = 0
        self._last_noisy_deflection = (0.0, 0.0)

    # -- commands ---------------------------------------------------------

    def set_bend(self, bend: BendState) -> tuple[float, float, float]:
        """Quasi-static coarse move; validates the implied tendon pulls."""
        pulls = pulls_from_bend(self.config.geometry, bend, self.config.limits)
        self.bend = bend
        return pulls

    def command_plane_coarse(self, target_xy) -> BendState:
        """Point the laser ray at a plane target using tendons only."""
        bend = plane_ik(self.config.geometry, self.config.limits, target_xy,
                        self.plane_z)
        self.set_bend(bend)
        return bend

    def set_powers(self, cmd: PowerCommand) -> None:
        self.power_cmd = cmd

    def command_fine_plane(self, target_xy) -> PowerCommand:
        """Steer the plane point to target_xy with heater powers only.

        Inverts the local affine map, falling back to scaling the deflection
        onto the hexagon boundary when the request lands epsilon outside
        (affine shear can push inscribed-rectangle corners out by a hair).
        """
        p0, a = plane_affine(self.config.geometry, self.bend, self.plane_z)
        u = np.linalg.solve(a, np.asarray(target_xy, dtype=float) - p0)
        th, lim = self.config.thermal, self.config.limits
        try:
            cmd = allocate_powers(th, u, lim, self.config.geometry.heater_angles)
        except OutsideWorkspace:
            u = self._scale_into_workspace(u)
            cmd = allocate_powers(th, u, lim, self.config.geometry.heater_angles)
        self.set_powers(cmd)
        return cmd

    def _scale_into_workspace(self, u: np.ndarray) -> np.ndarray:
        clip = self.workspace.clip_segment((0.0, 0.0), u)
        if clip is None or clip[1] * (1.0 + FINE_OVERSHOOT_FRAC) < 1.0:
            raise OutsideWorkspace(
                f"deflection target {tuple(np.round(u, 4))} mm unreachable")
        return u * (clip[1] * (1.0 - 1e-9))

    def set_laser(self, on: bool) -> None:
        """Laser interlock: the beam can only be lit while SCANNING."""
        if on and self.mode != MODE_SCANNING:
            raise InterlockViolation(
                f"laser may only fire in SCANNING mode, not {self.mode}")
        self.laser_on = bool(on)

    def set_mode(self, mode: str) -> None:
        """Leaving SCANNING forces the laser off, whatever else happens."""
        self.mode = mode
        if mode != MODE_SCANNING:
            self.laser_on = False

    def set_insertion_depth(self, depth: float) -> None:
        if not depth > 0.0:
            raise TargetOutOfReach(f"insertion depth must be > 0, got {depth!r}")
        self.insertion_depth = float(depth)

    def estop(self) -> None:
        """Zero powers, laser off. Bend is left where it is; tendons hold."""
        self.power_cmd = PowerCommand.zero()
        self.laser_on = False

    # -- state readouts ---------------------------------------------------

    def clean_deflection(self) -> np.ndarray:
        return np.asarray(self.thermal_state.deflection)

    def clean_plane_point(self) -> np.ndarray:
        pose = forward_kinematics(self.config.geometry, self.bend,
                                  self.thermal_state.deflection)
        return project_tip_to_plane(pose, self.plane_z)

    def aim_plane_point(self) -> np.ndarray:
        """Plane point the coarse bend aims at, ignoring thermal deflection."""
        pose = forward_kinematics(self.config.geometry, self.bend)
        return project_tip_to_plane(pose, self.plane_z)

    def plane_map(self):
        """Local affine map (p0, A) from deflection to plane point."""
        return plane_affine(self.config.geometry, self.bend, self.plane_z)

    def noisy_plane_point(self) -> np.ndarray | None:
        pose = forward_kinematics(self.config.geometry, self.bend,
                                  self._last_noisy_deflection)
        try:
            return project_tip_to_plane(pose, self.plane_z)
        except NoIntersection:
            return None

    @property
    def spots_array(self) -> np.ndarray:
        """Stamped spots as an (N, 3) array of (x, y, radius)."""
        return np.asarray(self.spots, dtype=float).reshape(-1, 3)

    @property
    def tick_count(self) -> int:
        return self._tick_count

    def world_tip(self, pose: TipPose) -> tuple[float, float, float]:
        dz = self.insertion_depth - self.config.geometry.total_length
        return (pose.position[0], pose.position[1], pose.position[2] + dz)

    # -- simulation -------------------------------------------------------

    def tick(self, n: int = 1) -> TelemetryRecord | None:
        """Advance n steps of dt; returns the latest telemetry record (None
        only before the first strided record exists)."""
        g, th = self.config.geometry, self.config.thermal
        record = None
        for _ in range(n):
            self.thermal_state = step_dynamics(th, self.thermal_state,
                                               self.power_cmd, self.dt,
                                               g.heater_angles)
            noise = self.rng.normal(0.0, self.noise_sigma, 2)
            u = np.asarray(self.thermal_state.deflection) + noise
            self._last_noisy_deflection = (float(u[0]), float(u[1]))
            self.max_temperature = max(self.max_temperature,
                                       self.thermal_state.peak_temperature)
            self.time += self.dt
            self._tick_count += 1

            pose = forward_kinematics(g, self.bend, self._last_noisy_deflection)
            plane = self.noisy_plane_point()
            if self.laser_on and plane is not None:
                self.spots.append((float(plane[0]), float(plane[1]),
                                   self.config.scan.spot_radius))

            if self._tick_count % self.telemetry_stride == 0:
                record = self._emit_record(pose, plane)
        if record is None and self.records:
            record = self.records[-1]
        return record

    def _emit_record(self, pose: TipPose, plane) -> TelemetryRecord:
        new_spots = self.spots[self._spots_recorded:]
        self._spots_recorded = len(self.spots)
        record = TelemetryRecord(
            t=round(self.time, 9),
            tip=self.world_tip(pose),
            plane_point=(None if plane is None
                         else (float(plane[0]), float(plane[1]))),
            bend=(self.bend.theta, self.bend.phi),
            powers=self.power_cmd.p,
            peak_temperature=self.thermal_state.peak_temperature,
            laser_on=self.laser_on,
            mode=self.mode,
            scan_pass_index=self.scan_pass_index,
            pulls=pulls_from_bend(self.config.geometry, self.bend,
                                  self.config.limits),
            deflection=self._last_noisy_deflection,
            n_spots=len(self.spots),
            new_spots=new_spots)
        self.records.append(record)
        return record

    def flush_telemetry(self) -> TelemetryRecord | None:
        """Force a record at the current tick even off the stride grid, so
        trailing spots and state are never lost to a coarse stride."""
        if self._tick_count == 0:
            return None
        if self.records and self.records[-1].t == round(self.time, 9):
            return self.records[-1]
        pose = forward_kinematics(self.config.geometry, self.bend,
                                  self._last_noisy_deflection)
        return self._emit_record(pose, self.noisy_plane_point())

    def settle_to_plane_target(self, target_xy, tol: float | None = None,
                               timeout: float = 400.0) -> None:
        """Command the fine target and tick until the disturbance-free plane
        point is within tol of it. Exponential convergence makes the needed
        time tau * log(distance / tol)."""
        tol = self.config.scan.settle_tolerance if tol is None else tol
        self.command_fine_plane(target_xy)
        target = np.asarray(target_xy, dtype=float)
        deadline = self.time + timeout
        while True:
            self.tick()
            if float(np.linalg.norm(self.clean_plane_point() - target)) < tol:
                return
            if self.time > deadline:
                raise TargetOutOfReach(
                    f"did not settle within {tol} mm of "
                    f"{tuple(np.round(target, 4))} in {timeout} s")

    # -- scan execution ---------------------------------------------------

    def execute_stroke(self, stroke: np.ndarray) -> None:
        """Transit dark to the stroke start, then sweep lit to its end.

        The lagged deflection moves along the straight line toward its
        target, so a single end-point command traces the whole stroke
        continuously; early-tick spot spacing is (length / tau) * dt, a few
        microns at default settings. Dwelling at the endpoint rather than
        chasing a ramp avoids the v * tau tracking lag a moving setpoint
        would suffer.
        """
        self.set_laser(False)
        self.settle_to_plane_target(stroke[0])
        self.set_laser(True)
        self.tick()
        if float(np.linalg.norm(stroke[1] - stroke[0])) > 0.0:
            self.settle_to_plane_target(stroke[1])
        else:
            self.tick(int(round(1.0 / self.dt)))
        self.set_laser(False)

    def execute_path(self, path: RasterPath, pose_target=None) -> None:
        """Run one raster path, optionally re-posing coarse first."""
        if pose_target is not None:
            self.set_mode(MODE_COARSE_NAV)
            self.command_plane_coarse(pose_target)
            self.tick()
        self.set_mode(MODE_SCANNING)
        for stroke in path.strokes:
            self.execute_stroke(stroke)
        self.set_mode(MODE_SETTLED)

    def execute_plan(self, plan: ScanPlan, on_tile=None) -> None:
        """Execute every tile: coarse pose to the tile centre, then strokes.

        Each tile is one scan pass; the pass index increments as the tile
        begins so telemetry can be coloured per pass.
        """
        for index, tile in enumerate(plan.tiles):
            self.scan_pass_index += 1
            if on_tile is not None:
                on_tile(index, tile)
            self.execute_path(tile.path, pose_target=tile.center)

    # -- logging ----------------------------------------------------------

    def write_jsonl(self, path) -> int:
        """Dump collected telemetry as JSON lines; returns record count."""
        self.flush_telemetry()
        with open(path, "w", encoding="utf-8") as fh:
            for rec in self.records:
                fh.write(json.dumps(rec.to_dict()) + "\n")
        return len(self.records)
