/**
 * Scene rendering tests over a recording canvas stub: trail bookkeeping,
 * the tip marker's laser states, the workspace hexagon, the temperature
 * gauge red line, and the mode badge.
 */

import { describe, expect, it } from "vitest";
import type { TelemetryRecord } from "../src/protocol.js";
import {
  GAUGE_MAX_C,
  GAUGE_MIN_C,
  RED_LINE_C,
  applyFrame,
  gaugeFraction,
  gaugeGeometry,
  newViewState,
  renderFrame,
  totalTrailPoints,
  trailColors,
  type Canvas2DLike,
} from "../src/view.js";

interface Call {
  fn: string;
  args: unknown[];
  fillStyle: string;
  strokeStyle: string;
}

class RecordingContext implements Canvas2DLike {
  fillStyle = "";
  strokeStyle = "";
  lineWidth = 1;
  font = "";
  calls: Call[] = [];

  private log(fn: string, ...args: unknown[]): void {
    this.calls.push({
      fn,
      args,
      fillStyle: this.fillStyle,
      strokeStyle: this.strokeStyle,
    });
  }

  beginPath(): void {
    this.log("beginPath");
  }
  moveTo(x: number, y: number): void {
    this.log("moveTo", x, y);
  }
  lineTo(x: number, y: number): void {
    this.log("lineTo", x, y);
  }
  closePath(): void {
    this.log("closePath");
  }
  arc(x: number, y: number, r: number, a0: number, a1: number): void {
    this.log("arc", x, y, r, a0, a1);
  }
  fill(): void {
    this.log("fill");
  }
  stroke(): void {
    this.log("stroke");
  }
  fillRect(x: number, y: number, w: number, h: number): void {
    this.log("fillRect", x, y, w, h);
  }
  strokeRect(x: number, y: number, w: number, h: number): void {
    this.log("strokeRect", x, y, w, h);
  }
  clearRect(x: number, y: number, w: number, h: number): void {
    this.log("clearRect", x, y, w, h);
  }
  fillText(text: string, x: number, y: number): void {
    this.log("fillText", text, x, y);
  }

  texts(): string[] {
    return this.calls
      .filter((c) => c.fn === "fillText")
      .map((c) => String(c.args[0]));
  }
}

function rec(over: Partial<TelemetryRecord> = {}): TelemetryRecord {
  return {
    t: 0.01,
    tip: [0, 0, 118],
    plane_point: [1.0, -0.5],
    bend: [0.1, 0.2],
    powers: [0, 0, 0],
    peak_temperature: 24,
    laser_on: false,
    mode: "SETTLED",
    scan_pass_index: 0,
    new_spots: [],
    ...over,
  };
}

describe("trail bookkeeping", () => {
  it("stamps one trail point per laser-on record with a plane point", () => {
    const view = newViewState();
    let lit = 0;
    for (let i = 0; i < 200; i++) {
      const on = i % 3 === 0;
      const gap = i % 17 === 0; // occasionally no plane point
      applyFrame(
        view,
        rec({
          laser_on: on,
          plane_point: gap ? null : [i * 0.01, -i * 0.01],
          scan_pass_index: 1,
          mode: on ? "SCANNING" : "SETTLED",
        }),
      );
      if (on && !gap) lit++;
    }
    expect(totalTrailPoints(view)).toBe(lit);
    expect(view.trails.length).toBe(1);
  });

  it("gives three passes exactly blue, red, yellow in order", () => {
    const view = newViewState();
    for (const pass of [1, 1, 2, 2, 2, 3]) {
      applyFrame(
        view,
        rec({
          laser_on: true,
          mode: "SCANNING",
          scan_pass_index: pass,
          plane_point: [pass, pass],
        }),
      );
    }
    expect(trailColors(view)).toEqual(["blue", "red", "yellow"]);
    expect(view.trails.map((t) => t.points.length)).toEqual([2, 3, 1]);
  });

  it("keeps trails sorted by pass even out of arrival order", () => {
    const view = newViewState();
    for (const pass of [2, 1, 3]) {
      applyFrame(
        view,
        rec({ laser_on: true, scan_pass_index: pass, plane_point: [0, 0] }),
      );
    }
    expect(view.trails.map((t) => t.pass)).toEqual([1, 2, 3]);
  });
});

describe("temperature gauge", () => {
  it("maps the gauge span to 0..1 with clamping", () => {
    expect(gaugeFraction(GAUGE_MIN_C)).toBe(0);
    expect(gaugeFraction(GAUGE_MAX_C)).toBe(1);
    expect(gaugeFraction(50)).toBeCloseTo(0.5, 12);
    expect(gaugeFraction(-40)).toBe(0);
    expect(gaugeFraction(500)).toBe(1);
  });

  it("draws the red interlock line exactly at the 75 C height", () => {
    const view = newViewState(800, 600);
    const ctx = new RecordingContext();
    renderFrame(
      { ...view, latest: rec({ peak_temperature: 30 }), status: "connected" },
      ctx,
    );
    const g = gaugeGeometry(view);
    const expectFrac = (RED_LINE_C - GAUGE_MIN_C) / (GAUGE_MAX_C - GAUGE_MIN_C);
    expect(g.redLineY).toBeCloseTo(g.bottom - expectFrac * (g.bottom - g.top), 9);

    const strokes = ctx.calls.filter((c) => c.fn === "stroke");
    const red = strokes.filter((c) => c.strokeStyle === "red");
    expect(red.length).toBe(1);
    const idx = ctx.calls.indexOf(red[0] as Call);
    const before = ctx.calls.slice(0, idx).reverse();
    const move = before.find((c) => c.fn === "moveTo");
    expect(move).toBeDefined();
    expect(move?.args[1]).toBeCloseTo(g.redLineY, 9);
  });
});

describe("scene rendering", () => {
  it("renders a placeholder when no frame has arrived", () => {
    const ctx = new RecordingContext();
    renderFrame(newViewState(), ctx);
    expect(ctx.texts()).toContain("disconnected");
    expect(ctx.calls.some((c) => c.fn === "arc")).toBe(false);
  });

  it("draws the fine-workspace hexagon around the plane point", () => {
    const view = newViewState(800, 600);
    view.status = "connected";
    view.latest = rec({ plane_point: [0, 0] });
    const ctx = new RecordingContext();
    renderFrame(view, ctx);
    const close = ctx.calls.findIndex((c) => c.fn === "closePath");
    expect(close).toBeGreaterThan(0);
    const open = ctx.calls
      .slice(0, close)
      .map((c) => c.fn)
      .lastIndexOf("beginPath");
    const verts = ctx.calls
      .slice(open, close)
      .filter((c) => c.fn === "moveTo" || c.fn === "lineTo");
    expect(verts.length).toBe(6);
    // hexagon vertices sit 2 mm from the center, i.e. 12 px at 6 px/mm
    for (const v of verts) {
      const dx = (v.args[0] as number) - 400;
      const dy = (v.args[1] as number) - 300;
      expect(Math.hypot(dx, dy)).toBeCloseTo(12, 9);
    }
  });

  it("draws a hollow tip when dark and a filled tip when lasing", () => {
    const dark = new RecordingContext();
    const view = newViewState();
    view.status = "connected";
    view.latest = rec({ laser_on: false });
    renderFrame(view, dark);
    const darkArc = dark.calls.findIndex((c) => c.fn === "arc");
    expect(darkArc).toBeGreaterThanOrEqual(0);
    const afterDark = dark.calls.slice(darkArc + 1, darkArc + 2)[0];
    expect(afterDark?.fn).toBe("stroke");

    const lit = new RecordingContext();
    view.latest = rec({ laser_on: true, mode: "SCANNING", scan_pass_index: 1 });
    renderFrame(view, lit);
    const litArc = lit.calls.findIndex((c) => c.fn === "arc");
    const afterLit = lit.calls.slice(litArc + 1, litArc + 2)[0];
    expect(afterLit?.fn).toBe("fill");
    expect(afterLit?.fillStyle).toBe("#ff4040");
  });

  it("shows the current mode in the badge", () => {
    for (const mode of ["IDLE", "SCANNING", "SAFE"] as const) {
      const ctx = new RecordingContext();
      const view = newViewState();
      view.status = "connected";
      view.latest = rec({ mode, plane_point: null });
      renderFrame(view, ctx);
      expect(ctx.texts()).toContain(mode);
    }
  });

  it("draws one polyline per trail in its pass color", () => {
    const view = newViewState();
    view.status = "connected";
    for (const pass of [1, 2]) {
      for (let i = 0; i < 4; i++) {
        applyFrame(
          view,
          rec({
            laser_on: true,
            mode: "SCANNING",
            scan_pass_index: pass,
            plane_point: [i * 0.1, pass],
          }),
        );
      }
    }
    const ctx = new RecordingContext();
    renderFrame(view, ctx);
    // the gauge (which also strokes in red) starts at its strokeRect border
    const gaugeStart = ctx.calls.findIndex((c) => c.fn === "strokeRect");
    const trailStrokes = ctx.calls
      .slice(0, gaugeStart)
      .filter((c) => c.fn === "stroke" && ["blue", "red"].includes(c.strokeStyle));
    expect(trailStrokes.map((c) => c.strokeStyle)).toEqual(["blue", "red"]);
  });
});
