"""Versioned JSON wire protocol between the session core and operator UIs.

One socket carries four message kinds: a hello handshake (inbound, once),
commands (inbound), and server-to-client state / event / error messages.
Every server message round-trips through a schema here, and the op-per-mode
gating table ships as a JSON fixture so UI implementations load the very
same file and stay in lockstep with the server.
"""

from __future__ import annotations

import json
from importlib import resources

from jsonschema import Draft202012Validator

from .errors import ProtocolError

PROTOCOL_VERSION = 1

ROLES = ("operator", "observer")

# Server error codes.
ERR_BAD_MESSAGE = "bad_message"
ERR_ILLEGAL_MODE = "illegal_mode"
ERR_OUT_OF_REACH = "out_of_reach"
ERR_BAD_SEQ = "bad_seq"
ERR_READ_ONLY = "read_only"
ERR_REJECTED = "rejected"
ERROR_CODES = (ERR_BAD_MESSAGE, ERR_ILLEGAL_MODE, ERR_OUT_OF_REACH,
               ERR_BAD_SEQ, ERR_READ_ONLY, ERR_REJECTED)

# Server event codes. The first group acknowledges commands; the second is
# emitted autonomously when the session machine moves by itself.
EVT_INSERTED = "inserted"
EVT_COARSE_MOVE = "coarse_move"
EVT_SCAN_STARTED = "scan_started"
EVT_LASER_SET = "laser_set"
EVT_ESTOPPED = "estopped"
EVT_RESET = "reset"
EVT_SETTLED = "settled"
EVT_SCAN_DONE = "scan_done"
EVENT_CODES = (EVT_INSERTED, EVT_COARSE_MOVE, EVT_SCAN_STARTED, EVT_LASER_SET,
               EVT_ESTOPPED, EVT_RESET, EVT_SETTLED, EVT_SCAN_DONE)

# seq stamped on autonomous events, which no client command triggered.
AUTON_SEQ = -1

with resources.files("fiberctl").joinpath("data/mode_table.json").open(
        "r", encoding="utf-8") as _fh:
    _TABLE = json.load(_fh)

OPS: tuple[str, ...] = tuple(_TABLE["ops"])
MODE_TABLE: dict[str, tuple[str, ...]] = {
    mode: tuple(ops) for mode, ops in _TABLE["modes"].items()}
MODES: tuple[str, ...] = tuple(MODE_TABLE)

_POS_NUMBER = {"type": "number", "exclusiveMinimum": 0}

# Per-op params schemas. Ops absent here take no params.
_PARAM_SCHEMAS = {
    "insert": {
        "type": "object",
        "required": ["depth_mm"],
        "properties": {"depth_mm": _POS_NUMBER},
        "additionalProperties": False,
    },
    "jog": {
        "type": "object",
        "required": ["dx_mm", "dy_mm"],
        "properties": {"dx_mm": {"type": "number"},
                       "dy_mm": {"type": "number"}},
        "additionalProperties": False,
    },
    "goto": {
        "type": "object",
        "required": ["x_mm", "y_mm"],
        "properties": {"x_mm": {"type": "number"},
                       "y_mm": {"type": "number"}},
        "additionalProperties": False,
    },
    "raster": {
        "type": "object",
        "required": ["width_mm", "height_mm", "pitch_mm", "speed_mm_s"],
        "properties": {"width_mm": _POS_NUMBER,
                       "height_mm": _POS_NUMBER,
                       "pitch_mm": _POS_NUMBER,
                       "speed_mm_s": _POS_NUMBER},
        "additionalProperties": False,
    },
    "laser": {
        "type": "object",
        "required": ["on"],
        "properties": {"on": {"type": "boolean"}},
        "additionalProperties": False,
    },
}

_NO_PARAMS = {"type": "object", "properties": {}, "additionalProperties": False}

HELLO_SCHEMA = {
    "type": "object",
    "required": ["v", "type", "role"],
    "properties": {
        "v": {"const": PROTOCOL_VERSION},
        "type": {"const": "hello"},
        "role": {"enum": list(ROLES)},
    },
    "additionalProperties": False,
}

HELLO_ACK_SCHEMA = {
    "type": "object",
    "required": ["v", "type", "role", "mode"],
    "properties": {
        "v": {"const": PROTOCOL_VERSION},
        "type": {"const": "hello_ack"},
        "role": {"enum": list(ROLES)},
        "mode": {"enum": list(MODES)},
    },
    "additionalProperties": False,
}

COMMAND_SCHEMA = {
    "type": "object",
    "required": ["v", "seq", "op"],
    "properties": {
        "v": {"const": PROTOCOL_VERSION},
        "seq": {"type": "integer", "minimum": 0},
        "op": {"enum": list(OPS)},
        "params": {"type": "object"},
    },
    "additionalProperties": False,
}

_SPOT_ITEM = {"type": "array", "items": {"type": "number"},
              "minItems": 3, "maxItems": 3}

STATE_SCHEMA = {
    "type": "object",
    "required": ["v", "type", "tick", "t", "tip", "plane_point", "bend",
                 "powers", "peak_temperature", "laser_on", "mode",
                 "scan_pass_index", "new_spots"],
    "properties": {
        "v": {"const": PROTOCOL_VERSION},
        "type": {"const": "state"},
        "tick": {"type": "integer", "minimum": 0},
        "t": {"type": "number"},
        "tip": {"type": "array", "items": {"type": "number"},
                "minItems": 3, "maxItems": 3},
        "plane_point": {
            "oneOf": [{"type": "null"},
                      {"type": "array", "items": {"type": "number"},
                       "minItems": 2, "maxItems": 2}]},
        "bend": {"type": "array", "items": {"type": "number"},
                 "minItems": 2, "maxItems": 2},
        "powers": {"type": "array", "items": {"type": "number"},
                   "minItems": 3, "maxItems": 3},
        "peak_temperature": {"type": "number"},
        "laser_on": {"type": "boolean"},
        "mode": {"enum": list(MODES)},
        "scan_pass_index": {"type": "integer", "minimum": 0},
        "pulls": {"type": "array", "items": {"type": "number"},
                  "minItems": 3, "maxItems": 3},
        "deflection": {"type": "array", "items": {"type": "number"},
                       "minItems": 2, "maxItems": 2},
        "n_spots": {"type": "integer", "minimum": 0},
        "new_spots": {"type": "array", "items": _SPOT_ITEM},
    },
    "additionalProperties": False,
}

EVENT_SCHEMA = {
    "type": "object",
    "required": ["v", "type", "seq", "code", "mode"],
    "properties": {
        "v": {"const": PROTOCOL_VERSION},
        "type": {"const": "event"},
        "seq": {"type": "integer", "minimum": AUTON_SEQ},
        "code": {"enum": list(EVENT_CODES)},
        "mode": {"enum": list(MODES)},
        "detail": {"type": "object"},
    },
    "additionalProperties": False,
}

ERROR_SCHEMA = {
    "type": "object",
    "required": ["v", "type", "seq", "code", "detail", "mode"],
    "properties": {
        "v": {"const": PROTOCOL_VERSION},
        "type": {"const": "error"},
        "seq": {"type": "integer", "minimum": AUTON_SEQ},
        "code": {"enum": list(ERROR_CODES)},
        "detail": {"type": "string"},
        "mode": {"enum": list(MODES)},
    },
    "additionalProperties": False,
}

# Validators are precompiled; jsonschema.validate() would rebuild one per
# call, which dominates runtime under message fuzzing.
_HELLO_V = Draft202012Validator(HELLO_SCHEMA)
_HELLO_ACK_V = Draft202012Validator(HELLO_ACK_SCHEMA)
_COMMAND_V = Draft202012Validator(COMMAND_SCHEMA)
_STATE_V = Draft202012Validator(STATE_SCHEMA)
_EVENT_V = Draft202012Validator(EVENT_SCHEMA)
_ERROR_V = Draft202012Validator(ERROR_SCHEMA)
_PARAM_VS = {op: Draft202012Validator(s) for op, s in _PARAM_SCHEMAS.items()}
_NO_PARAMS_V = Draft202012Validator(_NO_PARAMS)


def _check(obj, validator: Draft202012Validator, kind: str) -> dict:
    if not isinstance(obj, dict):
        raise ProtocolError(f"bad {kind}: expected an object")
    err = next(validator.iter_errors(obj), None)
    if err is not None:
        raise ProtocolError(f"bad {kind}: {err.message}")
    return obj


def validate_hello(obj) -> dict:
    return _check(obj, _HELLO_V, "hello")


def validate_command(obj) -> dict:
    """Schema-check an inbound command, including its op-specific params."""
    _check(obj, _COMMAND_V, "command")
    params = obj.get("params", {})
    v = _PARAM_VS.get(obj["op"], _NO_PARAMS_V)
    err = next(v.iter_errors(params), None)
    if err is not None:
        raise ProtocolError(f"bad params for op {obj['op']!r}: {err.message}")
    return obj


def validate_server_message(obj) -> dict:
    """Dispatch on the type field; every outbound message must pass here."""
    kind = obj.get("type") if isinstance(obj, dict) else None
    table = {"state": _STATE_V, "event": _EVENT_V, "error": _ERROR_V,
             "hello_ack": _HELLO_ACK_V}
    if kind not in table:
        raise ProtocolError(f"bad server message: unknown type {kind!r}")
    return _check(obj, table[kind], kind)


def op_allowed(mode: str, op: str) -> bool:
    return op in MODE_TABLE.get(mode, ())


def canonical_json(obj) -> str:
    """Stable serialisation used for logs and checksums."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def make_hello(role: str = "operator") -> dict:
    return validate_hello(
        {"v": PROTOCOL_VERSION, "type": "hello", "role": role})


def make_command(seq: int, op: str, params: dict | None = None) -> dict:
    msg = {"v": PROTOCOL_VERSION, "seq": seq, "op": op}
    if params:
        msg["params"] = params
    return validate_command(msg)


def make_event(seq: int, code: str, mode: str,
               detail: dict | None = None) -> dict:
    msg = {"v": PROTOCOL_VERSION, "type": "event", "seq": seq, "code": code,
           "mode": mode}
    if detail is not None:
        msg["detail"] = detail
    return validate_server_message(msg)


def make_error(seq: int, code: str, detail: str, mode: str) -> dict:
    return validate_server_message(
        {"v": PROTOCOL_VERSION, "type": "error", "seq": seq, "code": code,
         "detail": detail, "mode": mode})
