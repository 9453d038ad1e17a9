/**
 * Offline replay against real telemetry: run the twin's bundled
 * three-pass phantom scenario, then rebuild the scene from its JSONL and
 * check the trails come out as three passes in blue, red, yellow.
 */

import { execFileSync } from "node:child_process";
import { mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { beforeAll, describe, expect, it } from "vitest";
import {
  buildReplayView,
  litRecordCount,
  parseTelemetryJsonl,
  trailColorsInOrder,
} from "../src/replay.js";
import { totalTrailPoints } from "../src/view.js";
import type { TelemetryRecord } from "../src/protocol.js";

let text = "";
let records: TelemetryRecord[] = [];

beforeAll(() => {
  const out = mkdtempSync(join(tmpdir(), "replay-test-"));
  execFileSync(
    "twin",
    ["run", "--scenario", "phantom_three_pass", "--out", out, "--seed", "11"],
    { timeout: 120_000, stdio: ["ignore", "pipe", "pipe"] },
  );
  text = readFileSync(join(out, "telemetry.jsonl"), "utf-8");
  records = parseTelemetryJsonl(text);
}, 120_000);

describe("telemetry parsing", () => {
  it("parses every record of a real run", () => {
    expect(records.length).toBeGreaterThan(100);
    for (const r of records.slice(0, 50)) {
      expect(r.powers.length).toBe(3);
      expect(typeof r.laser_on).toBe("boolean");
    }
  });

  it("rejects a malformed line with its line number", () => {
    const lines = text.split("\n").filter((l) => l.trim() !== "");
    const broken =
      lines.slice(0, 3).join("\n") + "\n{not json\n" + lines.slice(3).join("\n");
    expect(() => parseTelemetryJsonl(broken)).toThrow(/line 4/);
  });

  it("rejects a record with a missing field", () => {
    const obj = JSON.parse(text.split("\n")[0] ?? "{}") as Record<
      string,
      unknown
    >;
    delete obj["powers"];
    expect(() => parseTelemetryJsonl(JSON.stringify(obj))).toThrow(/line 1/);
  });
});

describe("three-pass replay", () => {
  it("rebuilds exactly three trails in blue, red, yellow order", () => {
    const view = buildReplayView(records);
    expect(view.status).toBe("replaying");
    expect(view.trails.map((t) => t.pass)).toEqual([1, 2, 3]);
    expect(trailColorsInOrder(view)).toEqual(["blue", "red", "yellow"]);
  });

  it("stamps one trail point per lit record", () => {
    const view = buildReplayView(records);
    const lit = litRecordCount(records);
    expect(lit).toBeGreaterThan(0);
    expect(totalTrailPoints(view)).toBe(lit);
  });

  it("ends with the laser off and some ablation done", () => {
    const last = records[records.length - 1];
    expect(last?.laser_on).toBe(false);
    expect(last?.n_spots ?? 0).toBeGreaterThan(0);
  });
});
