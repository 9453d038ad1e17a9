/**
 * Offline replay: load a telemetry JSONL file and rebuild the scene from
 * it, trail by trail, exactly as the live view would have drawn it.
 */

import { TelemetrySchema, type TelemetryRecord } from "./protocol.js";
import { applyFrame, newViewState, trailColors, type ViewState } from "./view.js";

/**
 * Parse telemetry JSONL text into records. Throws on the first malformed
 * line, naming its 1-based line number.
 */
export function parseTelemetryJsonl(text: string): TelemetryRecord[] {
  const records: TelemetryRecord[] = [];
  const lines = text.split("\n");
  for (let i = 0; i < lines.length; i++) {
    const line = (lines[i] ?? "").trim();
    if (line === "") continue;
    let obj: unknown;
    try {
      obj = JSON.parse(line);
    } catch {
      throw new Error(`telemetry line ${i + 1}: not valid JSON`);
    }
    const parsed = TelemetrySchema.safeParse(obj);
    if (!parsed.success) {
      throw new Error(
        `telemetry line ${i + 1}: ${parsed.error.issues[0]?.message ?? "bad record"}`,
      );
    }
    records.push(parsed.data);
  }
  return records;
}

/** Fold a whole recording into a fresh view in replay status. */
export function buildReplayView(
  records: TelemetryRecord[],
  width = 800,
  height = 600,
  scale = 6,
): ViewState {
  const view = newViewState(width, height, scale);
  view.status = "replaying";
  for (const rec of records) applyFrame(view, rec);
  return view;
}

/** Trail colors ordered by scan pass, e.g. blue,red,yellow for 3 passes. */
export function trailColorsInOrder(view: ViewState): string[] {
  return trailColors(view);
}

/** Count of records that would stamp a trail point. */
export function litRecordCount(records: TelemetryRecord[]): number {
  return records.filter((r) => r.laser_on && r.plane_point !== null).length;
}
