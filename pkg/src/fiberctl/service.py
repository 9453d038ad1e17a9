"""Networked session service and deterministic session logs.

The server steps one shared session at a fixed tick rate. State frames are
broadcast latest-wins: each client holds a single undelivered-frame slot
that a fresh frame displaces, so a slow consumer drops frames instead of
stalling the loop or growing a backlog. Events and command replies are
delivered reliably (they are rare and small).

Exactly one client holds control. The first to ask for the operator role in
its hello gets it; everyone else is an observer whose commands bounce with
a read_only error.

Every command that reaches the session, its replies, autonomous events and
every telemetry frame go to a JSON-lines log with a sha256 footer. The twin
is seeded, so re-running the logged commands at the logged tick indices
must reproduce the log byte for byte; replay_log asserts exactly that.
"""

from __future__ import annotations

import asyncio
import hashlib
import json
import signal
from collections import deque

from .config import config_from_mapping, config_to_mapping
from .errors import ReplayError
from .protocol import (AUTON_SEQ, ERR_BAD_MESSAGE, ERR_READ_ONLY,
                       PROTOCOL_VERSION, canonical_json, make_error,
                       validate_hello)
from .session import Session
from .twin import Scene, Twin

LOG_VERSION = 1


def session_header(twin: Twin) -> dict:
    """Everything needed to rebuild an identical session."""
    return {"k": "header", "log_v": LOG_VERSION, "protocol": PROTOCOL_VERSION,
            "config": config_to_mapping(twin.config),
            "scene": {"standoff_mm": twin.scene.standoff,
                      "insertion_depth_mm": twin.scene.insertion_depth},
            "seed": twin.seed, "dt_s": twin.dt,
            "noise_sigma_mm": twin.noise_sigma,
            "telemetry_stride_ticks": twin.telemetry_stride}


def session_from_header(header: dict) -> Session:
    scene = Scene(standoff=header["scene"]["standoff_mm"],
                  insertion_depth=header["scene"]["insertion_depth_mm"])
    twin = Twin(config=config_from_mapping(header["config"]), scene=scene,
                seed=header["seed"], dt=header["dt_s"],
                noise_sigma=header["noise_sigma_mm"],
                telemetry_stride=header["telemetry_stride_ticks"])
    return Session(twin)


class SessionLog:
    """Append-only JSONL log with a sha256 footer."""

    def __init__(self, path, header: dict):
        self.path = path
        self._fh = open(path, "w", encoding="utf-8")
        self._hash = hashlib.sha256()
        self._write(header)

    def _write(self, obj: dict) -> None:
        line = canonical_json(obj) + "\n"
        self._hash.update(line.encode("utf-8"))
        self._fh.write(line)

    def command(self, tick: int, msg: dict) -> None:
        self._write({"k": "rx", "tick": tick, "msg": msg})

    def replies(self, tick: int, msgs: list[dict]) -> None:
        self._write({"k": "tx", "tick": tick, "msgs": msgs})

    def events(self, tick: int, msgs: list[dict]) -> None:
        self._write({"k": "ev", "tick": tick, "msgs": msgs})

    def frame(self, frame: dict) -> None:
        self._write({"k": "fr", "tick": frame["tick"], "msg": frame})

    def close(self) -> str:
        digest = self._hash.hexdigest()
        self._fh.write(canonical_json({"k": "footer", "sha256": digest})
                       + "\n")
        self._fh.close()
        return digest


def read_log(path) -> tuple[dict, list[dict], str]:
    """Split a log into header, entries and footer digest, verifying the
    checksum of the raw bytes."""
    with open(path, "rb") as fh:
        raw = fh.read().splitlines(keepends=True)
    if len(raw) < 2:
        raise ReplayError(f"{path}: too short to be a session log")
    footer = json.loads(raw[-1])
    if footer.get("k") != "footer" or "sha256" not in footer:
        raise ReplayError(f"{path}: missing checksum footer")
    digest = hashlib.sha256(b"".join(raw[:-1])).hexdigest()
    if digest != footer["sha256"]:
        raise ReplayError(f"{path}: checksum mismatch "
                          f"(footer {footer['sha256'][:12]}, "
                          f"actual {digest[:12]})")
    header = json.loads(raw[0])
    if header.get("k") != "header" or header.get("log_v") != LOG_VERSION:
        raise ReplayError(f"{path}: unsupported log header")
    if header.get("protocol") != PROTOCOL_VERSION:
        raise ReplayError(f"{path}: protocol version mismatch")
    entries = [json.loads(ln) for ln in raw[1:-1]]
    return header, entries, digest


def replay_log(path, on_frame=None) -> dict:
    """Re-execute a session log against a fresh twin and demand byte-equal
    replies, events and frames. Raises ReplayError at the first divergence.

    on_frame, when given, receives every regenerated frame dict; consoles
    use it to redraw the session.
    """
    header, entries, digest = read_log(path)
    session = session_from_header(header)
    last_frame: dict | None = None
    last_events: list[dict] = []
    pending_tx: list[dict] | None = None

    def do_tick() -> None:
        nonlocal last_frame, last_events
        last_frame = session.tick()
        last_events = session.drain_events()
        if on_frame is not None and last_frame is not None:
            on_frame(last_frame)

    def diverged(lineno: int, what: str, want, got) -> ReplayError:
        return ReplayError(
            f"{path}:{lineno}: {what} diverged\n"
            f"  logged:   {canonical_json(want)}\n"
            f"  replayed: {canonical_json(got)}")

    for lineno, entry in enumerate(entries, start=2):
        tick = entry["tick"]
        while session.twin.tick_count < tick:
            do_tick()
        kind = entry["k"]
        if kind == "rx":
            pending_tx = session.handle_message(entry["msg"])
        elif kind == "tx":
            got = pending_tx or []
            if canonical_json(got) != canonical_json(entry["msgs"]):
                raise diverged(lineno, "command replies", entry["msgs"], got)
            pending_tx = None
        elif kind == "ev":
            if canonical_json(last_events) != canonical_json(entry["msgs"]):
                raise diverged(lineno, "events", entry["msgs"], last_events)
        elif kind == "fr":
            if canonical_json(last_frame) != canonical_json(entry["msg"]):
                raise diverged(lineno, f"frame at tick {tick}",
                               entry["msg"], last_frame)
        else:
            raise ReplayError(f"{path}:{lineno}: unknown entry kind {kind!r}")
    return {"entries": len(entries), "ticks": session.twin.tick_count,
            "sha256": digest, "n_spots": len(session.twin.spots),
            "passes": session.twin.scan_pass_index}


class _Client:
    """Per-connection outbound state: reliable events, latest-wins frame."""

    def __init__(self, ws, role: str):
        self.ws = ws
        self.role = role
        self.frame: str | None = None
        self.events: deque[str] = deque()
        self.wake = asyncio.Event()

    def push_frame(self, payload: str) -> None:
        self.frame = payload
        self.wake.set()

    def push_event(self, payload: str) -> None:
        self.events.append(payload)
        self.wake.set()

    async def sender(self) -> None:
        while True:
            await self.wake.wait()
            self.wake.clear()
            while self.events:
                await self.ws.send(self.events.popleft())
            if self.frame is not None:
                frame, self.frame = self.frame, None
                await self.ws.send(frame)


class TwinServer:
    """Websocket front door for one session."""

    def __init__(self, session: Session, time_scale: float = 1.0,
                 log: SessionLog | None = None):
        self.session = session
        self.time_scale = time_scale
        self.log = log
        self._clients: set[_Client] = set()
        self._operator: _Client | None = None
        self._inbound: asyncio.Queue = asyncio.Queue()
        self._stop = asyncio.Event()

    def stop(self) -> None:
        self._stop.set()

    def _apply_command(self, client: _Client, msg: dict) -> None:
        if client.role != "operator":
            seq = msg.get("seq", AUTON_SEQ) if isinstance(msg, dict) \
                else AUTON_SEQ
            if not isinstance(seq, int) or isinstance(seq, bool) \
                    or seq < AUTON_SEQ:
                seq = AUTON_SEQ
            reply = make_error(
                seq, ERR_READ_ONLY, "observers cannot command the session",
                self.session.mode.value)
            client.push_event(json.dumps(reply))
            return
        tick = self.session.twin.tick_count
        replies = self.session.handle_message(msg)
        if self.log is not None:
            self.log.command(tick, msg)
            self.log.replies(tick, replies)
        for reply in replies:
            client.push_event(json.dumps(reply))

    async def _tick_loop(self) -> None:
        dt = self.session.twin.dt
        while not self._stop.is_set():
            while not self._inbound.empty():
                client, msg = self._inbound.get_nowait()
                self._apply_command(client, msg)
            frame = self.session.tick()
            events = self.session.drain_events()
            if self.log is not None:
                if events:
                    self.log.events(self.session.twin.tick_count, events)
                self.log.frame(frame)
            for ev in events:
                payload = json.dumps(ev)
                for c in self._clients:
                    c.push_event(payload)
            payload = json.dumps(frame)
            for c in self._clients:
                c.push_frame(payload)
            delay = dt / self.time_scale if self.time_scale > 0 else 0.0
            await asyncio.sleep(delay)

    async def handle_client(self, ws) -> None:
        # Handshake: the first message must be a hello; role assignment is
        # first-come-first-served for control.
        try:
            raw = await ws.recv()
            hello = validate_hello(json.loads(raw))
        except Exception:
            await ws.send(json.dumps(make_error(
                AUTON_SEQ, ERR_BAD_MESSAGE,
                "expected a hello as the first message",
                self.session.mode.value)))
            return
        role = hello["role"]
        if role == "operator" and self._operator is not None:
            role = "observer"
        client = _Client(ws, role)
        if role == "operator":
            self._operator = client
        self._clients.add(client)
        await ws.send(json.dumps(
            {"v": PROTOCOL_VERSION, "type": "hello_ack", "role": role,
             "mode": self.session.mode.value}))
        sender = asyncio.ensure_future(client.sender())
        try:
            async for raw in ws:
                try:
                    msg = json.loads(raw)
                except (json.JSONDecodeError, UnicodeDecodeError):
                    client.push_event(json.dumps(make_error(
                        AUTON_SEQ, ERR_BAD_MESSAGE, "invalid json",
                        self.session.mode.value)))
                    continue
                await self._inbound.put((client, msg))
        finally:
            sender.cancel()
            self._clients.discard(client)
            if self._operator is client:
                self._operator = None

    async def serve(self, host: str = "127.0.0.1", port: int = 8765) -> None:
        import websockets
        async with websockets.serve(self.handle_client, host, port):
            print(f"listening on ws://{host}:{port}", flush=True)
            tick_task = asyncio.ensure_future(self._tick_loop())
            try:
                await self._stop.wait()
            finally:
                tick_task.cancel()


def run_server(session: Session, host: str = "127.0.0.1", port: int = 8765,
               time_scale: float = 1.0, log_path=None) -> None:
    """Blocking entry point; SIGINT/SIGTERM shuts down cleanly."""
    log = SessionLog(log_path, session_header(session.twin)) \
        if log_path else None
    server = TwinServer(session, time_scale=time_scale, log=log)

    async def main() -> None:
        loop = asyncio.get_running_loop()
        for sig in (signal.SIGINT, signal.SIGTERM):
            try:
                loop.add_signal_handler(sig, server.stop)
            except NotImplementedError:
                pass
        await server.serve(host, port)

    try:
        asyncio.run(main())
    finally:
        if log is not None:
            digest = log.close()
            print(f"session log {log_path} sha256={digest}", flush=True)
