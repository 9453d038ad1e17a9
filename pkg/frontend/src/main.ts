/**
 * Browser entry point: wires a canvas, a websocket client and the input
 * handlers together. Everything here is thin glue; all logic that matters
 * lives in the importable modules so it stays testable under node.
 */

import { TeleopClient } from "./client.js";
import type { UiAction } from "./input.js";
import type { Role } from "./protocol.js";
import {
  applyFrame,
  newViewState,
  renderFrame,
  type Canvas2DLike,
} from "./view.js";

function pxToMm(
  view: { width: number; height: number; scale: number },
  px: number,
  py: number,
): [number, number] {
  return [(px - view.width / 2) / view.scale, (view.height / 2 - py) / view.scale];
}

function boot(): void {
  const q = new URLSearchParams(window.location.search);
  const host = q.get("host") ?? "127.0.0.1";
  const port = q.get("port") ?? "8765";
  const role: Role = q.get("role") === "observer" ? "observer" : "operator";

  const canvas = document.getElementById("scene") as HTMLCanvasElement | null;
  if (canvas === null) throw new Error("missing #scene canvas");
  const ctx = canvas.getContext("2d") as unknown as Canvas2DLike | null;
  if (ctx === null) throw new Error("no 2d context");

  const view = newViewState(canvas.width, canvas.height);
  const client = new TeleopClient(`ws://${host}:${port}`, role, {
    socketFactory: (url) => new WebSocket(url) as unknown as never,
  });
  client.onStatus((s) => {
    view.status = s;
    view.role = client.role;
  });

  const tick = (): void => {
    const frame = client.consumeFrame();
    if (frame !== null) applyFrame(view, frame);
    renderFrame(view, ctx);
    window.requestAnimationFrame(tick);
  };
  window.requestAnimationFrame(tick);

  window.addEventListener("keydown", (ev) => {
    let action: UiAction | null = null;
    switch (ev.key) {
      case "ArrowLeft":
      case "ArrowRight":
      case "ArrowUp":
      case "ArrowDown":
        action = { kind: "key", key: ev.key };
        break;
      case " ":
        action = { kind: "space" };
        break;
      case "i":
        action = { kind: "insert", depth_mm: 120 };
        break;
      case "r":
        action = {
          kind: "raster",
          width_mm: 1.5,
          height_mm: 1.0,
          pitch_mm: 0.1,
          speed_mm_s: 2.0,
        };
        break;
      case "Escape":
        action = { kind: "estop" };
        break;
      case "Enter":
        action = { kind: "reset" };
        break;
    }
    if (action !== null) {
      ev.preventDefault();
      client.dispatch(action);
    }
  });

  canvas.addEventListener("click", (ev) => {
    const rect = canvas.getBoundingClientRect();
    const [x_mm, y_mm] = pxToMm(
      view,
      ev.clientX - rect.left,
      ev.clientY - rect.top,
    );
    client.dispatch({ kind: "click", x_mm, y_mm });
  });
}

if (typeof document !== "undefined") {
  if (document.readyState === "loading") {
    document.addEventListener("DOMContentLoaded", boot);
  } else {
    boot();
  }
}
