"""Wire protocol: schemas, gating fixture, canonical serialisation."""

import json
from importlib import resources

import pytest

from fiberctl import (MODES, OPS, ProtocolError, canonical_json,
                      make_command, make_hello, op_allowed, validate_command,
                      validate_hello, validate_server_message)
from fiberctl.protocol import (ERROR_CODES, EVENT_CODES, MODE_TABLE,
                               PROTOCOL_VERSION, make_error, make_event)


def test_fixture_and_module_agree():
    with resources.files("fiberctl").joinpath("data/mode_table.json").open() as fh:
        table = json.load(fh)
    assert tuple(table["ops"]) == OPS
    assert {m: tuple(v) for m, v in table["modes"].items()} == MODE_TABLE


def test_gating_matrix():
    assert op_allowed("IDLE", "insert")
    assert not op_allowed("IDLE", "jog")
    assert op_allowed("SETTLED", "raster")
    assert not op_allowed("SCANNING", "jog")
    assert op_allowed("SCANNING", "laser")
    assert not op_allowed("SETTLED", "laser")
    assert op_allowed("SAFE", "reset")
    assert not op_allowed("IDLE", "reset")
    for mode in MODES:
        assert op_allowed(mode, "estop")  # estop is never gated
    assert not op_allowed("LIMBO", "estop")  # unknown mode allows nothing


def test_every_mode_reachable_in_table():
    assert set(MODES) == {"IDLE", "INSERTED", "COARSE_NAV", "SETTLED",
                          "SCANNING", "SAFE"}
    assert set(OPS) == {"insert", "jog", "goto", "raster", "laser", "estop",
                        "reset"}


def test_command_validation_happy():
    for msg in (
        make_command(0, "insert", {"depth_mm": 120.0}),
        make_command(1, "jog", {"dx_mm": -0.5, "dy_mm": 2.0}),
        make_command(2, "goto", {"x_mm": 1.0, "y_mm": 2.0}),
        make_command(3, "raster", {"width_mm": 3.0, "height_mm": 3.0,
                                   "pitch_mm": 0.4, "speed_mm_s": 0.1}),
        make_command(4, "laser", {"on": True}),
        make_command(5, "estop"),
        make_command(6, "reset"),
    ):
        assert validate_command(msg) is msg


@pytest.mark.parametrize("bad", [
    "not a dict",
    {},
    {"v": 2, "seq": 0, "op": "estop"},
    {"v": 1, "op": "estop"},
    {"v": 1, "seq": -1, "op": "estop"},
    {"v": 1, "seq": 0, "op": "warp"},
    {"v": 1, "seq": 0, "op": "estop", "extra": 1},
    {"v": 1, "seq": 0, "op": "jog", "params": {"dx_mm": 1.0}},
    {"v": 1, "seq": 0, "op": "jog", "params": {"dx_mm": "a", "dy_mm": 0}},
    {"v": 1, "seq": 0, "op": "insert", "params": {"depth_mm": 0}},
    {"v": 1, "seq": 0, "op": "insert", "params": {"depth_mm": -5}},
    {"v": 1, "seq": 0, "op": "raster",
     "params": {"width_mm": 1, "height_mm": 1, "pitch_mm": 0.4}},
    {"v": 1, "seq": 0, "op": "raster",
     "params": {"width_mm": 1, "height_mm": 1, "pitch_mm": 0,
                "speed_mm_s": 0.1}},
    {"v": 1, "seq": 0, "op": "laser", "params": {"on": 1}},
    {"v": 1, "seq": 0, "op": "estop", "params": {"hard": True}},
    {"v": 1, "seq": 0.5, "op": "estop"},
])
def test_command_validation_rejects(bad):
    with pytest.raises(ProtocolError):
        validate_command(bad)


def test_hello_validation():
    assert make_hello("operator")["role"] == "operator"
    assert validate_hello({"v": 1, "type": "hello", "role": "observer"})
    for bad in ({"v": 1, "type": "hello", "role": "root"},
                {"v": 1, "type": "hello"},
                {"type": "hello", "role": "operator"}):
        with pytest.raises(ProtocolError):
            validate_hello(bad)


def test_server_message_roundtrip():
    ev = make_event(3, "scan_started", "SCANNING", {"n_strokes": 4})
    err = make_error(4, "illegal_mode", "nope", "IDLE")
    assert validate_server_message(ev) is ev
    assert validate_server_message(err) is err
    with pytest.raises(ProtocolError):
        make_event(0, "mystery_code", "IDLE")
    with pytest.raises(ProtocolError):
        make_error(0, "nonsense", "detail", "IDLE")
    with pytest.raises(ProtocolError):
        validate_server_message({"type": "telemetry"})


def test_state_schema_accepts_real_frame(config):
    from fiberctl import Session, Twin
    s = Session(Twin(config=config, seed=0))
    frame = s.tick()
    assert frame["type"] == "state"
    assert validate_server_message(frame) is frame


def test_error_and_event_code_tables():
    assert "bad_message" in ERROR_CODES
    assert "illegal_mode" in ERROR_CODES
    assert "out_of_reach" in ERROR_CODES
    assert "scan_started" in EVENT_CODES
    assert "estopped" in EVENT_CODES


def test_canonical_json_stable():
    a = canonical_json({"b": 1, "a": [1.5, None, True]})
    b = canonical_json({"a": [1.5, None, True], "b": 1})
    assert a == b == '{"a":[1.5,null,true],"b":1}'


def test_protocol_version_constant():
    assert PROTOCOL_VERSION == 1
    assert make_command(0, "estop")["v"] == 1
