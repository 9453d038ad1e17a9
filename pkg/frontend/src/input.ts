/**
 * Operator input handling: UI gestures to gated wire commands.
 *
 * The gate is the client-side mirror of the server's mode table plus a
 * conservative reach check, so a well-behaved console never emits a
 * command the server would reject. Anything the gate cannot prove legal
 * comes back null and is simply not sent.
 */

import { opAllowed, type Mode, type Op, type Role } from "./protocol.js";

export type UiAction =
  | { kind: "key"; key: "ArrowLeft" | "ArrowRight" | "ArrowUp" | "ArrowDown" }
  | { kind: "click"; x_mm: number; y_mm: number }
  | {
      kind: "raster";
      width_mm: number;
      height_mm: number;
      pitch_mm: number;
      speed_mm_s: number;
    }
  | { kind: "space" } // toggle laser
  | { kind: "insert"; depth_mm: number }
  | { kind: "estop" }
  | { kind: "reset" };

export interface GateState {
  role: Role | null;
  mode: Mode | null;
  laserOn: boolean;
  /** Best current estimate of the tip's plane position, mm. */
  aimEst: [number, number] | null;
  /** Radial clamp for coarse targets, mm. Stays inside the true reach. */
  reachLimitMm: number;
  jogStepMm: number;
}

export const DEFAULT_REACH_LIMIT_MM = 45;
export const DEFAULT_JOG_STEP_MM = 0.5;

export interface GatedCommand {
  op: Op;
  params?: Record<string, number | boolean>;
}

function keyDelta(key: string, step: number): [number, number] | null {
  switch (key) {
    case "ArrowLeft":
      return [-step, 0];
    case "ArrowRight":
      return [step, 0];
    case "ArrowUp":
      return [0, step];
    case "ArrowDown":
      return [0, -step];
    default:
      return null;
  }
}

function actionOp(action: UiAction): Op {
  switch (action.kind) {
    case "key":
      return "jog";
    case "click":
      return "goto";
    case "raster":
      return "raster";
    case "space":
      return "laser";
    case "insert":
      return "insert";
    case "estop":
      return "estop";
    case "reset":
      return "reset";
  }
}

/**
 * Decide whether a UI action may be sent in the current state, and with
 * what parameters. Returns null when the action must be swallowed.
 */
export function gateAction(
  action: UiAction,
  state: GateState,
): GatedCommand | null {
  if (state.role !== "operator") return null;
  const op = actionOp(action);
  if (state.mode === null || !opAllowed(state.mode, op)) return null;

  switch (action.kind) {
    case "insert": {
      if (!(action.depth_mm > 0)) return null;
      return { op, params: { depth_mm: action.depth_mm } };
    }
    case "key": {
      const d = keyDelta(action.key, state.jogStepMm);
      if (d === null) return null;
      // refuse jogs that would walk the aim estimate out of reach
      if (state.aimEst !== null) {
        const nx = state.aimEst[0] + d[0];
        const ny = state.aimEst[1] + d[1];
        if (Math.hypot(nx, ny) > state.reachLimitMm) return null;
      }
      return { op, params: { dx_mm: d[0], dy_mm: d[1] } };
    }
    case "click": {
      // clamp radially into the conservative reach disc
      let { x_mm, y_mm } = action;
      if (!Number.isFinite(x_mm) || !Number.isFinite(y_mm)) return null;
      const r = Math.hypot(x_mm, y_mm);
      if (r > state.reachLimitMm) {
        const s = state.reachLimitMm / r;
        x_mm *= s;
        y_mm *= s;
      }
      return { op, params: { x_mm, y_mm } };
    }
    case "raster": {
      const { width_mm, height_mm, pitch_mm, speed_mm_s } = action;
      if (
        !(width_mm > 0) ||
        !(height_mm > 0) ||
        !(pitch_mm > 0) ||
        !(speed_mm_s > 0)
      ) {
        return null;
      }
      return {
        op,
        params: {
          width_mm,
          height_mm,
          pitch_mm,
          speed_mm_s,
        },
      };
    }
    case "space":
      return { op, params: { on: !state.laserOn } };
    case "estop":
    case "reset":
      return { op };
  }
}
