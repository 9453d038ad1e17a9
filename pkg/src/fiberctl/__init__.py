"""Digital twin and control stack for a hybrid tendon + electrothermal
surgical fiber: constant-curvature kinematics, hexagonal fine workspace,
raster scan planning with coverage accounting, and a teleoperation session
served over a versioned JSON protocol."""

__version__ = "0.1.0"

from .calibration import (CharacterizationSet, bundled_dataset,
                          check_linearity, fit_alpha, fit_gain,
                          fit_moment_arm, parse_characterization_csv)
from .config import (RobotConfig, config_from_mapping, config_to_mapping,
                     default_config, load_config, save_config)
from .errors import (ConfigError, DegenerateData, EmptyPath, FiberError,
                     InterlockViolation, LesionOutOfReach, NoIntersection,
                     OutsideWorkspace, PowerLimitExceeded, ProtocolError,
                     PullLimitExceeded, ReplayError, ScenarioError,
                     TargetOutOfReach)
from .geometry import FiberGeometry, SafetyLimits
from .kinematics import (BendState, TipPose, bend_from_pull,
                         calibrate_moment_arm, forward_kinematics,
                         inverse_kinematics, lateral_displacement,
                         max_bend_angle, pulls_from_bend)
from .planner import (CoverageReport, Lesion, RasterPath, ScanParams,
                      ScanPlan, TilePlan, coverage, inscribed_tile,
                      plan_scan, raster_path, swingback_path)
from .protocol import (MODE_TABLE, MODES, OPS, PROTOCOL_VERSION,
                       canonical_json, make_command, make_hello, op_allowed,
                       validate_command, validate_hello,
                       validate_server_message)
from .scenario import (PASS_COLORS, Scenario, ScenarioResult,
                       bundled_scenario, load_scenario, pass_color,
                       run_scenario, scenario_from_mapping)
from .service import (SessionLog, TwinServer, read_log, replay_log,
                      run_server, session_from_header, session_header)
from .session import Session, SessionMode
from .thermal import (PowerCommand, ThermalParams, ThermalState, Workspace,
                      allocate_powers, steady_state_deflection,
                      step_dynamics, workspace_contains, workspace_vertices)
from .tracker import DotFix, red_mask, track_red_dot
from .twin import (Scene, TelemetryRecord, Twin, plane_affine, plane_ik,
                   project_tip_to_plane)
