/**
 * Wire protocol v1 mirror for the teleop service.
 *
 * One JSON object per websocket message. The op-per-mode gating table is
 * loaded from the same JSON fixture the server ships, so client-side
 * enabling/disabling of controls can never drift from server-side gating.
 */

import { z } from "zod";
import table from "./mode_table.json" with { type: "json" };

export const PROTOCOL_VERSION = 1 as const;

export const ROLES = ["operator", "observer"] as const;
export type Role = (typeof ROLES)[number];

export type Op =
  | "insert"
  | "jog"
  | "goto"
  | "raster"
  | "laser"
  | "estop"
  | "reset";

export type Mode =
  | "IDLE"
  | "INSERTED"
  | "COARSE_NAV"
  | "SETTLED"
  | "SCANNING"
  | "SAFE";

const TableSchema = z.strictObject({
  ops: z.array(z.string()).min(1),
  modes: z.record(z.string(), z.array(z.string())),
});

const TABLE = TableSchema.parse(table);

export const OPS = TABLE.ops as readonly Op[];
export const MODES = Object.keys(TABLE.modes) as readonly Mode[];
export const MODE_TABLE = TABLE.modes as unknown as Readonly<
  Record<Mode, readonly Op[]>
>;

/** True when the server's mode table accepts `op` in `mode`. */
export function opAllowed(mode: Mode, op: Op): boolean {
  const ops = MODE_TABLE[mode];
  return ops !== undefined && ops.includes(op);
}

export const EVENT_CODES = [
  "inserted",
  "coarse_move",
  "scan_started",
  "laser_set",
  "estopped",
  "reset",
  "settled",
  "scan_done",
] as const;
export type EventCode = (typeof EVENT_CODES)[number];

export const ERROR_CODES = [
  "bad_message",
  "illegal_mode",
  "out_of_reach",
  "bad_seq",
  "read_only",
  "rejected",
] as const;
export type ErrorCode = (typeof ERROR_CODES)[number];

/** seq stamped on autonomous server events no client command triggered. */
export const AUTON_SEQ = -1;

const vLit = z.literal(PROTOCOL_VERSION);
const modeEnum = z.enum(MODES as [Mode, ...Mode[]]);
const vec2 = z.tuple([z.number(), z.number()]);
const vec3 = z.tuple([z.number(), z.number(), z.number()]);

export const HelloAckSchema = z.strictObject({
  v: vLit,
  type: z.literal("hello_ack"),
  role: z.enum(ROLES),
  mode: modeEnum,
});
export type HelloAck = z.infer<typeof HelloAckSchema>;

/** One telemetry record, as stored in twin JSONL logs (no envelope). */
export const TelemetrySchema = z.strictObject({
  t: z.number(),
  tip: vec3,
  plane_point: z.union([z.null(), vec2]),
  bend: vec2,
  powers: vec3,
  peak_temperature: z.number(),
  laser_on: z.boolean(),
  mode: modeEnum,
  scan_pass_index: z.number().int().min(0),
  pulls: vec3.optional(),
  deflection: vec2.optional(),
  n_spots: z.number().int().min(0).optional(),
  new_spots: z.array(vec3),
});
export type TelemetryRecord = z.infer<typeof TelemetrySchema>;

/** Same record wrapped in the live-stream envelope. */
export const StateSchema = TelemetrySchema.extend({
  v: vLit,
  type: z.literal("state"),
  tick: z.number().int().min(0),
});
export type StateFrame = z.infer<typeof StateSchema>;

export const EventSchema = z.strictObject({
  v: vLit,
  type: z.literal("event"),
  seq: z.number().int().min(AUTON_SEQ),
  code: z.enum(EVENT_CODES),
  mode: modeEnum,
  detail: z.record(z.string(), z.unknown()).optional(),
});
export type ServerEvent = z.infer<typeof EventSchema>;

export const ErrorSchema = z.strictObject({
  v: vLit,
  type: z.literal("error"),
  seq: z.number().int().min(AUTON_SEQ),
  code: z.enum(ERROR_CODES),
  detail: z.string(),
  mode: modeEnum,
});
export type ServerError = z.infer<typeof ErrorSchema>;

export type ServerMessage = HelloAck | StateFrame | ServerEvent | ServerError;

export class ProtocolViolation extends Error {}

const SERVER_SCHEMAS: Record<string, z.ZodType> = {
  hello_ack: HelloAckSchema,
  state: StateSchema,
  event: EventSchema,
  error: ErrorSchema,
};

/** Parse and schema-check one inbound server message. */
export function parseServerMessage(raw: string): ServerMessage {
  let obj: unknown;
  try {
    obj = JSON.parse(raw);
  } catch {
    throw new ProtocolViolation("server message is not JSON");
  }
  if (typeof obj !== "object" || obj === null || Array.isArray(obj)) {
    throw new ProtocolViolation("server message is not an object");
  }
  const kind = (obj as { type?: unknown }).type;
  const schema = typeof kind === "string" ? SERVER_SCHEMAS[kind] : undefined;
  if (schema === undefined) {
    throw new ProtocolViolation(`unknown server message type ${String(kind)}`);
  }
  const res = schema.safeParse(obj);
  if (!res.success) {
    throw new ProtocolViolation(`bad ${String(kind)}: ${res.error.message}`);
  }
  return res.data as ServerMessage;
}

export interface Hello {
  v: typeof PROTOCOL_VERSION;
  type: "hello";
  role: Role;
}

export function makeHello(role: Role): Hello {
  return { v: PROTOCOL_VERSION, type: "hello", role };
}

const posNum = z.number().positive();

// Per-op params; ops absent here take none. Matches the server schemas.
const PARAM_SCHEMAS: Partial<Record<Op, z.ZodType>> = {
  insert: z.strictObject({ depth_mm: posNum }),
  jog: z.strictObject({ dx_mm: z.number(), dy_mm: z.number() }),
  goto: z.strictObject({ x_mm: z.number(), y_mm: z.number() }),
  raster: z.strictObject({
    width_mm: posNum,
    height_mm: posNum,
    pitch_mm: posNum,
    speed_mm_s: posNum,
  }),
  laser: z.strictObject({ on: z.boolean() }),
};

export type CommandParams = Record<string, number | boolean>;

export interface Command {
  v: typeof PROTOCOL_VERSION;
  seq: number;
  op: Op;
  params?: CommandParams;
}

/** Build a command the server is guaranteed to schema-accept; throws on
 * params that violate the op's schema (a client bug, not a user error). */
export function makeCommand(
  seq: number,
  op: Op,
  params?: CommandParams,
): Command {
  if (!Number.isInteger(seq) || seq < 0) {
    throw new ProtocolViolation(`bad seq ${seq}`);
  }
  if (!OPS.includes(op)) {
    throw new ProtocolViolation(`unknown op ${op}`);
  }
  const schema = PARAM_SCHEMAS[op];
  if (schema === undefined) {
    if (params !== undefined && Object.keys(params).length > 0) {
      throw new ProtocolViolation(`op ${op} takes no params`);
    }
    return { v: PROTOCOL_VERSION, seq, op };
  }
  const res = schema.safeParse(params ?? {});
  if (!res.success) {
    throw new ProtocolViolation(`bad params for ${op}: ${res.error.message}`);
  }
  return { v: PROTOCOL_VERSION, seq, op, params };
}

/** Scan passes cycle blue -> red -> yellow, matching the server's colors. */
export const PASS_COLORS = ["blue", "red", "yellow"] as const;

export function passColor(passIndex: number): string {
  const idx = Math.max(1, passIndex);
  return PASS_COLORS[(idx - 1) % PASS_COLORS.length] as string;
}
