/**
 * View state and 2-D scene rendering for the operator console.
 *
 * Pure drawing over a minimal Canvas2D-ish interface so tests can record
 * the draw calls without a DOM. No simulation logic lives here: everything
 * rendered comes straight out of telemetry.
 */

import {
  passColor,
  type Mode,
  type Role,
  type TelemetryRecord,
} from "./protocol.js";

/** The subset of CanvasRenderingContext2D the renderer touches. */
export interface Canvas2DLike {
  fillStyle: string;
  strokeStyle: string;
  lineWidth: number;
  font: string;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  closePath(): void;
  arc(
    x: number,
    y: number,
    r: number,
    a0: number,
    a1: number,
  ): void;
  fill(): void;
  stroke(): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  clearRect(x: number, y: number, w: number, h: number): void;
  fillText(text: string, x: number, y: number): void;
}

export interface Trail {
  pass: number;
  color: string;
  points: [number, number][];
}

export type ConnStatus =
  | "connecting"
  | "connected"
  | "replaying"
  | "disconnected";

export interface ViewState {
  width: number; // canvas px
  height: number;
  scale: number; // px per mm
  trails: Trail[];
  latest: TelemetryRecord | null;
  status: ConnStatus;
  role: Role | null;
  lesion: [number, number][] | null; // plane-frame polygon, if known
}

export function newViewState(
  width = 800,
  height = 600,
  scale = 6,
): ViewState {
  return {
    width,
    height,
    scale,
    trails: [],
    latest: null,
    status: "connecting",
    role: null,
    lesion: null,
  };
}

/**
 * Fold one telemetry record into the view. Laser-on records stamp exactly
 * one trail point onto the trail of their scan pass; trails are created
 * lazily with the blue/red/yellow cycle color of that pass.
 */
export function applyFrame(view: ViewState, frame: TelemetryRecord): void {
  view.latest = frame;
  if (!frame.laser_on || frame.plane_point === null) return;
  const pass = frame.scan_pass_index;
  let trail = view.trails.find((tr) => tr.pass === pass);
  if (trail === undefined) {
    trail = { pass, color: passColor(pass), points: [] };
    view.trails.push(trail);
    view.trails.sort((a, b) => a.pass - b.pass);
  }
  trail.points.push([frame.plane_point[0], frame.plane_point[1]]);
}

/** Trail colors in pass order; a three-pass session gives blue,red,yellow. */
export function trailColors(view: ViewState): string[] {
  return view.trails.map((tr) => tr.color);
}

export function totalTrailPoints(view: ViewState): number {
  return view.trails.reduce((n, tr) => n + tr.points.length, 0);
}

// Temperature gauge span and the hard interlock line drawn in red.
export const GAUGE_MIN_C = 20;
export const GAUGE_MAX_C = 80;
export const RED_LINE_C = 75;

/** 0..1 fill fraction of the temperature gauge for a given temperature. */
export function gaugeFraction(tempC: number): number {
  const f = (tempC - GAUGE_MIN_C) / (GAUGE_MAX_C - GAUGE_MIN_C);
  return Math.min(1, Math.max(0, f));
}

// Footprint of the fine electrothermal workspace drawn around the tip.
export const HEX_RADIUS_MM = 2.0;

function toPx(view: ViewState, x: number, y: number): [number, number] {
  return [view.width / 2 + x * view.scale, view.height / 2 - y * view.scale];
}

function polygon(
  ctx: Canvas2DLike,
  view: ViewState,
  pts: [number, number][],
): void {
  ctx.beginPath();
  pts.forEach(([x, y], i) => {
    const [px, py] = toPx(view, x, y);
    if (i === 0) ctx.moveTo(px, py);
    else ctx.lineTo(px, py);
  });
  ctx.closePath();
}

const MODE_BADGE_COLORS: Record<Mode, string> = {
  IDLE: "#888",
  INSERTED: "#4a90d9",
  COARSE_NAV: "#bb8800",
  SETTLED: "#2d8a34",
  SCANNING: "#c0392b",
  SAFE: "#7d3c98",
};

/** Draw the whole scene for the current view state. */
export function renderFrame(view: ViewState, ctx: Canvas2DLike): void {
  ctx.clearRect(0, 0, view.width, view.height);
  ctx.fillStyle = "#111";
  ctx.fillRect(0, 0, view.width, view.height);

  const frame = view.latest;
  if (frame === null || view.status === "disconnected") {
    ctx.fillStyle = "#999";
    ctx.font = "16px monospace";
    ctx.fillText("disconnected", view.width / 2 - 50, view.height / 2);
    return;
  }

  // lesion polygon under everything else
  if (view.lesion !== null && view.lesion.length >= 3) {
    polygon(ctx, view, view.lesion);
    ctx.fillStyle = "#402020";
    ctx.fill();
    ctx.strokeStyle = "#a05050";
    ctx.lineWidth = 1;
    ctx.stroke();
  }

  // per-pass scan trails
  for (const trail of view.trails) {
    if (trail.points.length === 0) continue;
    ctx.beginPath();
    trail.points.forEach(([x, y], i) => {
      const [px, py] = toPx(view, x, y);
      if (i === 0) ctx.moveTo(px, py);
      else ctx.lineTo(px, py);
    });
    ctx.strokeStyle = trail.color;
    ctx.lineWidth = 2;
    ctx.stroke();
  }

  // fine-workspace hexagon around the current tip position
  if (frame.plane_point !== null) {
    const [cx, cy] = frame.plane_point;
    const hex: [number, number][] = [];
    for (let k = 0; k < 6; k++) {
      const a = (Math.PI / 3) * k;
      hex.push([
        cx + HEX_RADIUS_MM * Math.cos(a),
        cy + HEX_RADIUS_MM * Math.sin(a),
      ]);
    }
    polygon(ctx, view, hex);
    ctx.strokeStyle = "#3a6ea5";
    ctx.lineWidth = 1;
    ctx.stroke();

    // tip marker: hollow when dark, filled while the laser is on
    const [px, py] = toPx(view, cx, cy);
    ctx.beginPath();
    ctx.arc(px, py, 4, 0, 2 * Math.PI);
    if (frame.laser_on) {
      ctx.fillStyle = "#ff4040";
      ctx.fill();
    } else {
      ctx.strokeStyle = "#eee";
      ctx.lineWidth = 1.5;
      ctx.stroke();
    }
  }

  renderGauge(view, ctx, frame.peak_temperature);

  // mode badge plus connection/role line
  ctx.fillStyle = MODE_BADGE_COLORS[frame.mode];
  ctx.fillRect(12, 12, 110, 24);
  ctx.fillStyle = "#fff";
  ctx.font = "14px monospace";
  ctx.fillText(frame.mode, 20, 29);
  ctx.fillStyle = "#aaa";
  ctx.font = "12px monospace";
  ctx.fillText(
    `${view.status}${view.role !== null ? " / " + view.role : ""}` +
      `  t=${frame.t.toFixed(2)}s  pass=${frame.scan_pass_index}`,
    12,
    52,
  );
}

/** Gauge geometry shared with tests: y positions of the bar and red line. */
export function gaugeGeometry(view: ViewState): {
  x: number;
  top: number;
  bottom: number;
  redLineY: number;
} {
  const top = 20;
  const bottom = view.height - 20;
  const redLineY =
    bottom - gaugeFraction(RED_LINE_C) * (bottom - top);
  return { x: view.width - 30, top, bottom, redLineY };
}

function renderGauge(
  view: ViewState,
  ctx: Canvas2DLike,
  tempC: number,
): void {
  const g = gaugeGeometry(view);
  const span = g.bottom - g.top;
  ctx.strokeStyle = "#666";
  ctx.lineWidth = 1;
  ctx.strokeRect(g.x, g.top, 14, span);
  const h = gaugeFraction(tempC) * span;
  ctx.fillStyle = tempC >= RED_LINE_C ? "#ff2020" : "#e07820";
  ctx.fillRect(g.x + 1, g.bottom - h, 12, h);
  // hard 75 C line
  ctx.beginPath();
  ctx.moveTo(g.x - 4, g.redLineY);
  ctx.lineTo(g.x + 18, g.redLineY);
  ctx.strokeStyle = "red";
  ctx.lineWidth = 2;
  ctx.stroke();
  ctx.fillStyle = "#ccc";
  ctx.font = "11px monospace";
  ctx.fillText(`${tempC.toFixed(1)}C`, g.x - 18, g.top - 6);
}
