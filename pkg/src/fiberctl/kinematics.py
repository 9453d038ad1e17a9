"""Constant-curvature kinematics of the tendon-driven bend section.

Frame convention: fiber base at the origin with +z along the straight fiber
axis; a bend of angle theta at azimuth phi curves the proximal section in the
plane spanned by z and (cos phi, sin phi, 0). The distal section (bend anchor
to tip) stays straight and leaves tangent to the arc. The electrothermal
deflection is a small offset expressed in the tip cross-section frame and is
carried to world coordinates by the no-torsion material rotation
M = Rz(phi) Ry(theta) Rz(-phi).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import (ConfigError, DegenerateData, PullLimitExceeded,
                     TargetOutOfReach)
from .geometry import TWO_PI, FiberGeometry, SafetyLimits

# Below this bend angle the arc is numerically straight; series expansions
# take over and the azimuth is meaningless, so it canonicalises to zero.
STRAIGHT_TOL = 1e-12

IK_TOL = 1e-6
IK_MAX_ITER = 200


@dataclass(frozen=True)
class BendState:
    """Bend angle theta (rad) and bend-plane azimuth phi (rad, [0, 2pi))."""

    theta: float
    phi: float = 0.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.theta) or self.theta < 0.0:
            raise ConfigError(f"theta must be finite and >= 0, got {self.theta!r}")
        if not math.isfinite(self.phi):
            raise ConfigError(f"phi must be finite, got {self.phi!r}")
        phi = self.phi % TWO_PI if self.theta > STRAIGHT_TOL else 0.0
        object.__setattr__(self, "phi", phi)


@dataclass(frozen=True)
class TipPose:
    """Tip position (mm) and unit tangent direction, world frame."""

    position: tuple[float, float, float]
    tangent: tuple[float, float, float]


def _arc_profile(bend_len: float, distal_len: float, theta: float):
    """In-plane tip coordinates (radial, axial) of arc + straight extension."""
    if theta < STRAIGHT_TOL:
        return 0.0, bend_len + distal_len
    radius = bend_len / theta
    # 2*sin^2(theta/2) == 1 - cos(theta) without the cancellation that wrecks
    # small angles in floating point.
    r = radius * 2.0 * math.sin(0.5 * theta) ** 2 + distal_len * math.sin(theta)
    z = radius * math.sin(theta) + distal_len * math.cos(theta)
    return r, z


def lateral_displacement(geom: FiberGeometry, theta: float) -> float:
    """Radial tip offset from the straight axis at bend angle theta, mm.

    Strictly increasing in theta over the operating range, which the
    bisection-based inverse relies on.
    """
    if theta < 0.0:
        raise ConfigError(f"theta must be >= 0, got {theta!r}")
    return _arc_profile(geom.bend_section_length, geom.tendon_anchor_from_tip,
                        theta)[0]


def material_rotation(theta: float, phi: float) -> np.ndarray:
    """No-torsion rotation carrying base cross-section axes to the tip."""
    cp, sp = math.cos(phi), math.sin(phi)
    ct, st = math.cos(theta), math.sin(theta)
    rz = np.array([[cp, -sp, 0.0], [sp, cp, 0.0], [0.0, 0.0, 1.0]])
    ry = np.array([[ct, 0.0, st], [0.0, 1.0, 0.0], [-st, 0.0, ct]])
    return rz @ ry @ rz.T


def forward_kinematics(geom: FiberGeometry, bend: BendState,
                       thermal_deflection=(0.0, 0.0)) -> TipPose:
    """Tip pose from bend state plus the cross-section thermal offset."""
    r, z = _arc_profile(geom.bend_section_length, geom.tendon_anchor_from_tip,
                        bend.theta)
    cp, sp = math.cos(bend.phi), math.sin(bend.phi)
    pos = np.array([r * cp, r * sp, z])
    m = material_rotation(bend.theta, bend.phi)
    u = np.asarray(thermal_deflection, dtype=float)
    pos = pos + m @ np.array([u[0], u[1], 0.0])
    tangent = m @ np.array([0.0, 0.0, 1.0])
    return TipPose(tuple(float(v) for v in pos),
                   tuple(float(v) for v in tangent))


def max_bend_angle(geom: FiberGeometry, limits: SafetyLimits) -> float:
    """Bend angle ceiling: the structural limit or the tendon-throw limit,
    whichever binds first."""
    return min(limits.max_bend_angle,
               limits.max_tendon_pull / geom.moment_arm)


def inverse_kinematics(geom: FiberGeometry, target_xy,
                       limits: SafetyLimits) -> BendState:
    """Bend state whose tip lateral offset lands on target_xy (mm, xy plane).

    phi comes straight from the target azimuth; theta by bisection on the
    monotone lateral profile, to 1e-6 mm. Raises TargetOutOfReach when the
    radius exceeds the reach at the bend-angle ceiling.
    """
    x, y = float(target_xy[0]), float(target_xy[1])
    r_target = math.hypot(x, y)
    if r_target < IK_TOL:
        return BendState(0.0, 0.0)
    theta_hi = max_bend_angle(geom, limits)
    r_max = lateral_displacement(geom, theta_hi)
    if r_target > r_max + IK_TOL:
        raise TargetOutOfReach(
            f"radius {r_target:.4f} mm exceeds reach {r_max:.4f} mm")
    phi = math.atan2(y, x) % TWO_PI
    lo, hi = 0.0, theta_hi
    for _ in range(IK_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if lateral_displacement(geom, mid) < r_target:
            lo = mid
        else:
            hi = mid
        # dr/dtheta is bounded by the total length, so this theta bracket
        # pins the radius well inside the 1e-6 mm contract.
        if hi - lo < IK_TOL / (10.0 * geom.total_length):
            break
    return BendState(0.5 * (lo + hi), phi)


def pulls_from_bend(geom: FiberGeometry, bend: BendState,
                    limits: SafetyLimits) -> tuple[float, float, float]:
    """Tendon shortenings (mm) realising a bend state.

    Delta l_i = d * theta * cos(a_i - phi), clamped at zero because tendons
    only pull. Raises PullLimitExceeded past the actuator throw.
    """
    pulls = []
    for a in geom.tendon_angles:
        dl = geom.moment_arm * bend.theta * math.cos(a - bend.phi)
        pulls.append(max(dl, 0.0))
    worst = max(pulls)
    if worst > limits.max_tendon_pull + 1e-12:
        raise PullLimitExceeded(
            f"pull {worst:.4f} mm exceeds limit {limits.max_tendon_pull:.4f} mm")
    return tuple(pulls)


def bend_from_pull(geom: FiberGeometry, pull: float,
                   tendon_index: int = 0) -> BendState:
    """Bend state from a single-tendon pull: theta = pull / d, phi at that
    tendon's angle. Convenience for calibration runs that exercise one tendon."""
    if pull < 0.0:
        raise ConfigError(f"pull must be >= 0, got {pull!r}")
    return BendState(pull / geom.moment_arm,
                     geom.tendon_angles[tendon_index])


def calibrate_moment_arm(geom: FiberGeometry, pulls, displacements,
                         bounds: tuple[float, float] = (0.2, 20.0)):
    """Fit the effective moment arm from measured pull/lateral-offset pairs.

    One-dimensional least squares of lateral_displacement(pull / d) against
    the measurements. Zero-pull rows carry no information and are dropped.
    Returns (d_eff, rms_residual_mm). Raises DegenerateData when fewer than
    two informative rows remain, displacements are all near zero, or the fit
    runs into the search bounds.
    """
    p = np.asarray(pulls, dtype=float)
    y = np.asarray(displacements, dtype=float)
    if p.shape != y.shape or p.ndim != 1:
        raise DegenerateData("pulls and displacements must be equal-length 1-D")
    keep = p > 0.0
    p, y = p[keep], y[keep]
    if len(p) < 2:
        raise DegenerateData("need at least two nonzero-pull measurements")
    if np.max(np.abs(y)) < 1e-6:
        raise DegenerateData("displacements are all ~0; nothing to fit")

    def sse(d: float) -> float:
        pred = np.array([lateral_displacement(geom, pi / d) for pi in p])
        return float(np.sum((pred - y) ** 2))

    res = minimize_scalar(sse, bounds=bounds, method="bounded",
                          options={"xatol": 1e-10})
    d_eff = float(res.x)
    span = bounds[1] - bounds[0]
    if d_eff - bounds[0] < 1e-3 * span or bounds[1] - d_eff < 1e-3 * span:
        raise DegenerateData(
            f"moment-arm fit hit the search bounds at {d_eff:.4g} mm")
    rms = math.sqrt(sse(d_eff) / len(p))
    return d_eff, rms
