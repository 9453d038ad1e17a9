"""Exception types shared across the fiberctl package."""


class FiberError(Exception):
    """Base class for all fiberctl errors."""


class ConfigError(FiberError):
    """Configuration document failed to parse or violates an invariant."""


class TargetOutOfReach(FiberError):
    """Requested tip target lies outside the tendon-section workspace."""


class PullLimitExceeded(FiberError):
    """A commanded bend would require pulling a tendon past its limit."""


class PowerLimitExceeded(FiberError):
    """A channel power exceeds the safe actuation cap."""


class OutsideWorkspace(FiberError):
    """Requested thermal deflection lies outside the reachable hexagon."""


class InterlockViolation(FiberError):
    """An action is blocked by a safety interlock (laser outside SCANNING)."""


class DegenerateData(FiberError):
    """Calibration data cannot constrain the fitted parameter."""


class EmptyPath(FiberError):
    """A planned path contains no waypoints after clipping."""


class LesionOutOfReach(FiberError):
    """Lesion extends beyond the coarse-positioning workspace."""


class NoIntersection(FiberError):
    """Tip ray does not intersect the target plane."""


class ScenarioError(FiberError):
    """Scenario document failed validation."""


class ProtocolError(FiberError):
    """Wire message failed schema validation or versioning checks."""


class ReplayError(FiberError):
    """Session log cannot be replayed (version or integrity mismatch)."""
