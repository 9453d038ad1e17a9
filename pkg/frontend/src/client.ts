/**
 * Teleoperation client: one websocket session against the twin service.
 *
 * Transport is injected as a tiny socket interface so tests can use the
 * `ws` package under node and the browser can hand in a WebSocket; the
 * client itself never touches either global. Inbound state frames land in
 * a single latest-wins slot: the render loop consumes at its own pace and
 * a slow consumer drops stale frames instead of building a queue.
 */

import {
  AUTON_SEQ,
  ProtocolViolation,
  makeCommand,
  makeHello,
  parseServerMessage,
  type Command,
  type HelloAck,
  type Mode,
  type Role,
  type ServerError,
  type ServerEvent,
  type StateFrame,
} from "./protocol.js";
import {
  DEFAULT_JOG_STEP_MM,
  DEFAULT_REACH_LIMIT_MM,
  gateAction,
  type GateState,
  type UiAction,
} from "./input.js";
import type { ConnStatus } from "./view.js";

/** Minimal duck type satisfied by both browser WebSocket and `ws`. */
export interface SocketLike {
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  send(data: string): void;
  close(): void;
}

export type SocketFactory = (url: string) => SocketLike;

export interface TeleopClientOptions {
  socketFactory: SocketFactory;
  reachLimitMm?: number;
  jogStepMm?: number;
}

export class TeleopClient {
  readonly url: string;
  readonly requestedRole: Role;
  role: Role | null = null;
  mode: Mode | null = null;
  status: ConnStatus = "connecting";
  laserOn = false;
  aimEst: [number, number] | null = null;
  lastFrame: StateFrame | null = null;
  framesReceived = 0;
  framesDropped = 0;
  events: ServerEvent[] = [];
  errors: ServerError[] = [];
  /** Inbound messages that failed schema validation (server bugs). */
  violations: string[] = [];

  private seq = 0;
  private slot: StateFrame | null = null;
  private readonly sock: SocketLike;
  private readonly reachLimitMm: number;
  private readonly jogStepMm: number;
  private frameListeners: ((f: StateFrame) => void)[] = [];
  private eventListeners: ((e: ServerEvent) => void)[] = [];
  private errorListeners: ((e: ServerError) => void)[] = [];
  private statusListeners: ((s: ConnStatus) => void)[] = [];

  constructor(url: string, role: Role, opts: TeleopClientOptions) {
    this.url = url;
    this.requestedRole = role;
    this.reachLimitMm = opts.reachLimitMm ?? DEFAULT_REACH_LIMIT_MM;
    this.jogStepMm = opts.jogStepMm ?? DEFAULT_JOG_STEP_MM;
    this.sock = opts.socketFactory(url);
    this.sock.onopen = () => {
      this.sock.send(JSON.stringify(makeHello(this.requestedRole)));
    };
    this.sock.onmessage = (ev) => this.handleRaw(ev.data);
    this.sock.onclose = () => this.setStatus("disconnected");
    this.sock.onerror = () => this.setStatus("disconnected");
  }

  onFrame(fn: (f: StateFrame) => void): void {
    this.frameListeners.push(fn);
  }
  onEvent(fn: (e: ServerEvent) => void): void {
    this.eventListeners.push(fn);
  }
  onError(fn: (e: ServerError) => void): void {
    this.errorListeners.push(fn);
  }
  onStatus(fn: (s: ConnStatus) => void): void {
    this.statusListeners.push(fn);
  }

  private setStatus(status: ConnStatus): void {
    if (this.status === status) return;
    this.status = status;
    for (const fn of this.statusListeners) fn(status);
  }

  private handleRaw(data: unknown): void {
    const raw =
      typeof data === "string"
        ? data
        : data instanceof Uint8Array
          ? new TextDecoder().decode(data)
          : String(data);
    let msg;
    try {
      msg = parseServerMessage(raw);
    } catch (exc) {
      // a malformed server message must not take the console down
      if (exc instanceof ProtocolViolation) {
        this.violations.push(exc.message);
        return;
      }
      throw exc;
    }
    switch (msg.type) {
      case "hello_ack":
        this.acceptHello(msg);
        break;
      case "state":
        this.acceptFrame(msg);
        break;
      case "event":
        this.events.push(msg);
        this.mode = msg.mode;
        for (const fn of this.eventListeners) fn(msg);
        break;
      case "error":
        this.errors.push(msg);
        this.mode = msg.mode;
        for (const fn of this.errorListeners) fn(msg);
        break;
    }
  }

  private acceptHello(msg: HelloAck): void {
    this.role = msg.role;
    this.mode = msg.mode;
    this.setStatus("connected");
  }

  private acceptFrame(frame: StateFrame): void {
    this.framesReceived += 1;
    if (this.slot !== null) this.framesDropped += 1;
    this.slot = frame;
    this.lastFrame = frame;
    this.mode = frame.mode;
    this.laserOn = frame.laser_on;
    // While scanning, the reported plane point sweeps the raster path, so
    // it is not where a later goto would land; keep the pre-scan aim.
    if (frame.mode !== "SCANNING" && frame.plane_point !== null) {
      this.aimEst = [frame.plane_point[0], frame.plane_point[1]];
    }
    for (const fn of this.frameListeners) fn(frame);
  }

  /** Take the freshest unrendered frame, or null. Clears the slot. */
  consumeFrame(): StateFrame | null {
    const f = this.slot;
    this.slot = null;
    return f;
  }

  private gateState(): GateState {
    return {
      role: this.role,
      mode: this.mode,
      laserOn: this.laserOn,
      aimEst: this.aimEst,
      reachLimitMm: this.reachLimitMm,
      jogStepMm: this.jogStepMm,
    };
  }

  /**
   * Gate a UI action against current mode/role/reach and send it if legal.
   * Returns the command that went out, or null if the action was swallowed.
   */
  dispatch(action: UiAction): Command | null {
    const gated = gateAction(action, this.gateState());
    if (gated === null) return null;
    const cmd = makeCommand(this.seq++, gated.op, gated.params);
    this.sock.send(JSON.stringify(cmd));
    return cmd;
  }

  close(): void {
    this.sock.close();
    this.setStatus("disconnected");
  }
}

/** True when an event message acknowledges the given operator command. */
export function acksCommand(ev: ServerEvent, cmd: Command): boolean {
  return ev.seq === cmd.seq && ev.seq !== AUTON_SEQ;
}
