"""Teleoperation session: a mode machine wrapped around the twin.

Modes gate which operations a console may issue; the gating table is the
JSON fixture re-exported by the protocol module. Operator-initiated
transitions happen inside handle_message; time-driven transitions (settle
detection, scan progress) happen inside tick, before the twin advances, so
a telemetry record can never pair a stale mode with fresh physics.
"""

from __future__ import annotations

import math
from collections import deque
from enum import Enum

import numpy as np

from .errors import (EmptyPath, FiberError, OutsideWorkspace, ProtocolError,
                     TargetOutOfReach)
from .kinematics import BendState
from .protocol import (AUTON_SEQ, ERR_BAD_MESSAGE, ERR_BAD_SEQ,
                       ERR_ILLEGAL_MODE, ERR_OUT_OF_REACH, ERR_REJECTED,
                       EVT_COARSE_MOVE, EVT_ESTOPPED, EVT_INSERTED,
                       EVT_LASER_SET, EVT_RESET, EVT_SCAN_DONE,
                       EVT_SCAN_STARTED, EVT_SETTLED, PROTOCOL_VERSION,
                       make_error, make_event, op_allowed, validate_command)
from .twin import Twin

# A coarse move counts as settled when the disturbance-free plane point has
# stayed within this band for a full window with no jog/goto.
SETTLE_WINDOW_S = 1.0
SETTLE_MOTION_MM = 0.05

# Dwell time on degenerate (zero-length) strokes instead of sweeping.
DWELL_S = 1.0

# Strokes shorter than this after clipping carry no information.
MIN_STROKE_MM = 1e-6


class SessionMode(str, Enum):
    IDLE = "IDLE"
    INSERTED = "INSERTED"
    COARSE_NAV = "COARSE_NAV"
    SETTLED = "SETTLED"
    SCANNING = "SCANNING"
    SAFE = "SAFE"


class Session:
    """One operator session driving one twin."""

    def __init__(self, twin: Twin):
        self.twin = twin
        self.mode = SessionMode.IDLE
        twin.set_mode(SessionMode.IDLE.value)
        self.last_seq = -1
        self.pending_events: list[dict] = []
        self._history: deque[tuple[float, np.ndarray]] = deque()
        self._strokes: list[np.ndarray] = []
        self._phase = "transit"
        self._progress = 0.0
        self._speed = 0.1
        self._dwell_left = 0
        self._armed = False

    # -- command handling ---------------------------------------------------

    def handle_message(self, msg) -> list[dict]:
        """Apply one client command; returns the server messages it provokes
        (exactly one: an event on success, an error otherwise)."""
        seq = msg.get("seq", AUTON_SEQ) if isinstance(msg, dict) else AUTON_SEQ
        if not isinstance(seq, int) or isinstance(seq, bool) or seq < AUTON_SEQ:
            # Unusable client seq; report the error as unsolicited.
            seq = AUTON_SEQ
        try:
            validate_command(msg)
        except ProtocolError as exc:
            return [self._error(seq, ERR_BAD_MESSAGE, str(exc))]
        seq = msg["seq"]
        if seq <= self.last_seq:
            return [self._error(seq, ERR_BAD_SEQ,
                                f"stale seq {seq} (last {self.last_seq})")]
        self.last_seq = seq
        op = msg["op"]
        if not op_allowed(self.mode.value, op):
            return [self._error(
                seq, ERR_ILLEGAL_MODE,
                f"op {op!r} not allowed in mode {self.mode.value}")]
        try:
            code, detail = getattr(self, f"_op_{op}")(msg.get("params", {}))
        except (TargetOutOfReach, OutsideWorkspace, EmptyPath) as exc:
            return [self._error(seq, ERR_OUT_OF_REACH, str(exc))]
        except FiberError as exc:
            return [self._error(seq, ERR_REJECTED, str(exc))]
        return [make_event(seq, code, self.mode.value, detail)]

    def _error(self, seq: int, code: str, detail: str) -> dict:
        return make_error(seq, code, detail, self.mode.value)

    def _event(self, code: str, detail: dict | None = None) -> None:
        """Queue an autonomous event for the next broadcast."""
        self.pending_events.append(
            make_event(AUTON_SEQ, code, self.mode.value, detail))

    def _set_mode(self, mode: SessionMode) -> None:
        self.mode = mode
        self.twin.set_mode(mode.value)

    # -- operations -----------------------------------------------------

    def _op_insert(self, params: dict):
        depth = float(params["depth_mm"])
        self.twin.set_insertion_depth(depth)
        self._set_mode(SessionMode.INSERTED)
        return EVT_INSERTED, {"depth_mm": depth}

    def _op_jog(self, params: dict):
        target = self.twin.aim_plane_point() + np.array(
            [float(params["dx_mm"]), float(params["dy_mm"])])
        return self._coarse_move(target)

    def _op_goto(self, params: dict):
        target = np.array([float(params["x_mm"]), float(params["y_mm"])])
        return self._coarse_move(target)

    def _coarse_move(self, target: np.ndarray):
        """Coarse moves reject unreachable targets rather than clamping."""
        bend = self.twin.command_plane_coarse(target)
        self._set_mode(SessionMode.COARSE_NAV)
        self._history.clear()
        return EVT_COARSE_MOVE, {"target": [float(target[0]), float(target[1])],
                                 "bend": [bend.theta, bend.phi]}

    def _op_raster(self, params: dict):
        width = float(params["width_mm"])
        height = float(params["height_mm"])
        pitch = float(params["pitch_mm"])
        speed = float(params["speed_mm_s"])
        strokes = self._build_raster(width, height, pitch)
        self._strokes = strokes
        self._speed = speed
        self._armed = False
        self._start_stroke()
        self.twin.scan_pass_index += 1
        self._set_mode(SessionMode.SCANNING)
        return EVT_SCAN_STARTED, {
            "n_strokes": len(strokes),
            "pass_index": self.twin.scan_pass_index,
            "pitch_mm": pitch, "speed_mm_s": speed}

    def _build_raster(self, width: float, height: float,
                      pitch: float) -> list[np.ndarray]:
        """Serpentine rows over a rect centred on the current aim point,
        each row clipped to the fine workspace through the local affine map."""
        p0, a = self.twin.plane_map()
        ainv = np.linalg.inv(a)
        n = int(math.floor(height / pitch + 1e-9)) + 1
        ys = (np.arange(n) - 0.5 * (n - 1)) * pitch
        strokes = []
        for i, y in enumerate(ys):
            ends = np.array([[-0.5 * width, y], [0.5 * width, y]])
            u0, u1 = ainv @ ends[0], ainv @ ends[1]
            clip = self.twin.workspace.clip_segment(u0, u1)
            if clip is None:
                continue
            pts = [p0 + a @ (u0 + (u1 - u0) * t) for t in clip]
            if float(np.linalg.norm(pts[1] - pts[0])) < MIN_STROKE_MM:
                continue
            if i % 2:
                pts.reverse()
            strokes.append(np.array(pts))
        if not strokes:
            raise EmptyPath("raster area lies outside the fine workspace")
        return strokes

    def _op_laser(self, params: dict):
        on = bool(params["on"])
        self._armed = on
        if self._phase == "burn" or not on:
            self.twin.set_laser(on)
        return EVT_LASER_SET, {"on": on}

    def _op_estop(self, params: dict):
        self.twin.estop()
        self._strokes = []
        self._armed = False
        self._history.clear()
        self._set_mode(SessionMode.SAFE)
        return EVT_ESTOPPED, {}

    def _op_reset(self, params: dict):
        self.twin.set_bend(BendState(0.0, 0.0))
        self._set_mode(SessionMode.IDLE)
        return EVT_RESET, {}

    # -- time-driven transitions ------------------------------------------

    def _start_stroke(self) -> None:
        """Transit dark to the head of the stroke queue."""
        stroke = self._strokes[0]
        self._phase = "transit"
        self._progress = 0.0
        self.twin.set_laser(False)
        self.twin.command_fine_plane(stroke[0])

    def _advance_scan(self) -> None:
        stroke = self._strokes[0]
        tol = self.twin.config.scan.settle_tolerance
        clean = self.twin.clean_plane_point()
        if self._phase == "transit":
            if float(np.linalg.norm(clean - stroke[0])) < tol:
                self._phase = "burn"
                self._progress = 0.0
                self._dwell_left = int(round(DWELL_S / self.twin.dt))
                self.twin.set_laser(self._armed)
            return
        length = float(np.linalg.norm(stroke[1] - stroke[0]))
        if length < MIN_STROKE_MM:
            self._dwell_left -= 1
            if self._dwell_left <= 0:
                self._finish_stroke()
            return
        self._progress = min(self._progress + self._speed * self.twin.dt,
                             length)
        virtual = stroke[0] + (stroke[1] - stroke[0]) * (self._progress / length)
        self.twin.command_fine_plane(virtual)
        if (self._progress >= length
                and float(np.linalg.norm(clean - stroke[1])) < tol):
            self._finish_stroke()

    def _finish_stroke(self) -> None:
        self._strokes.pop(0)
        if self._strokes:
            self._start_stroke()
        else:
            self._set_mode(SessionMode.SETTLED)
            self._armed = False
            self._history.clear()
            self._event(EVT_SCAN_DONE,
                        {"pass_index": self.twin.scan_pass_index})

    def _check_settled(self) -> None:
        if len(self._history) < 2:
            return
        t_now, p_now = self._history[-1]
        if t_now - self._history[0][0] < SETTLE_WINDOW_S - 1e-9:
            return
        motion = max(float(np.linalg.norm(p - p_now))
                     for _, p in self._history)
        if motion < SETTLE_MOTION_MM:
            self._set_mode(SessionMode.SETTLED)
            self._history.clear()
            self._event(EVT_SETTLED, {"t": t_now})

    def tick(self) -> dict | None:
        """Advance one control period: apply time-driven transitions, step
        the twin, and return the resulting state frame."""
        if self.mode is SessionMode.SCANNING and self._strokes:
            self._advance_scan()
        elif self.mode is SessionMode.COARSE_NAV:
            self._check_settled()
        record = self.twin.tick()
        if self.mode is SessionMode.COARSE_NAV:
            self._history.append((self.twin.time,
                                  self.twin.clean_plane_point()))
            while (self._history
                   and self.twin.time - self._history[0][0]
                   > SETTLE_WINDOW_S + 2.0 * self.twin.dt):
                self._history.popleft()
        return self.telemetry_frame(record)

    def drain_events(self) -> list[dict]:
        events, self.pending_events = self.pending_events, []
        return events

    # -- telemetry ----------------------------------------------------------

    def telemetry_frame(self, record=None) -> dict | None:
        """Flatten the newest twin record into a state message; the record
        already carries the spots stamped since the previous one."""
        if record is None:
            record = self.twin.records[-1] if self.twin.records else None
        if record is None:
            return None
        frame = {"v": PROTOCOL_VERSION, "type": "state",
                 "tick": self.twin.tick_count}
        frame.update(record.to_dict())
        return frame
