import time

import pytest
from starlette.testclient import TestClient

from overwatch.scenario import scenario_from_dict
from overwatch.telemetry import (
    CommandRejected,
    PROTOCOL_VERSION,
    SimSession,
    make_app,
    validate_command,
)

UGVS = ["ugv0", "ugv1"]


def interactive_scenario():
    return scenario_from_dict({
        "duration": 60.0,
        "interactive": True,
        "mav": {"start": [0.0, -0.5, 2.0]},
        "ugvs": [{"id": "ugv0", "start": [0.0, 0.0]},
                 {"id": "ugv1", "start": [4.0, 0.0]}],
        "events": [{"t": 0.5, "type": "transfer", "to": "ugv0"}],
    }, "console-test")


@pytest.fixture()
def session():
    s = SimSession(interactive_scenario(), seed=1)
    s.start()
    yield s
    s.stop()


def wrap(kind, payload=None):
    return {"v": PROTOCOL_VERSION, "type": kind, "payload": payload}


def recv_until(ws, kind, limit=200):
    for _ in range(limit):
        msg = ws.receive_json()
        if msg["type"] == kind:
            return msg
    raise AssertionError(f"no {kind} message within {limit} messages")


# -- validate_command ----------------------------------------------------------


def test_validate_return_home():
    assert validate_command({"type": "return_home"}, UGVS) == {"type": "return_home"}


def test_validate_rejects_unknown_robot():
    with pytest.raises(CommandRejected, match="ugv9"):
        validate_command({"type": "transfer", "to": "ugv9"}, UGVS)
    with pytest.raises(CommandRejected):
        validate_command({"type": "drive", "ugv": "nope", "linear": 0.1}, UGVS)


def test_validate_offset_passthrough():
    out = validate_command({"type": "set_offset", "v": [0.3, 0, 0]}, UGVS)
    assert out == {"type": "set_offset", "v": [0.3, 0.0, 0.0]}
    with pytest.raises(CommandRejected):
        validate_command({"type": "set_offset", "v": [1, 2]}, UGVS)


def test_validate_clamps_drive():
    out = validate_command({"type": "drive", "ugv": "ugv0", "linear": 5.0,
                            "angular": -9.0}, UGVS)
    assert out["linear"] == 0.6
    assert out["angular"] == -1.5


def test_validate_rejects_unknown_type():
    with pytest.raises(CommandRejected):
        validate_command({"type": "self_destruct"}, UGVS)
    with pytest.raises(CommandRejected):
        validate_command("drive", UGVS)


# -- service --------------------------------------------------------------------


def test_hello_and_snapshot_flow(session):
    app = make_app(session, snapshot_rate=20.0)
    with TestClient(app) as client:
        with client.websocket_connect("/ws") as ws:
            hello = ws.receive_json()
            assert hello["type"] == "hello"
            assert hello["payload"]["driver"] is True
            assert hello["payload"]["ugvs"] == UGVS
            snap = recv_until(ws, "snapshot")
            assert {"t", "tick", "phase", "mav", "ugvs"} <= set(snap["payload"])


def test_snapshot_rate_reasonable(session):
    app = make_app(session, snapshot_rate=20.0)
    with TestClient(app) as client:
        with client.websocket_connect("/ws") as ws:
            recv_until(ws, "snapshot")
            t0 = time.monotonic()
            count = 0
            while time.monotonic() - t0 < 1.0:
                msg = ws.receive_json()
                count += msg["type"] == "snapshot"
            assert 10 <= count <= 30


def test_malformed_payload_keeps_session_open(session):
    app = make_app(session, snapshot_rate=5.0)
    with TestClient(app) as client:
        with client.websocket_connect("/ws") as ws:
            ws.receive_json()  # hello
            ws.send_text("this is not json")
            msg = recv_until(ws, "error")
            assert "JSON" in msg["payload"]["reason"]
            ws.send_json(wrap("command", {"type": "transfer", "to": "ghost"}))
            msg = recv_until(ws, "error")
            assert "ghost" in msg["payload"]["reason"]
            # still alive: ping round-trips
            ws.send_json(wrap("ping", {"n": 1}))
            assert recv_until(ws, "pong")["payload"] == {"n": 1}


def test_envelope_version_checked(session):
    app = make_app(session, snapshot_rate=5.0)
    with TestClient(app) as client:
        with client.websocket_connect("/ws") as ws:
            ws.receive_json()
            ws.send_json({"v": 99, "type": "command", "payload": {"type": "return_home"}})
            msg = recv_until(ws, "error")
            assert "version" in msg["payload"]["reason"]


def test_drive_command_applies_clamped_and_visible(session):
    app = make_app(session, snapshot_rate=20.0)
    with TestClient(app) as client:
        with client.websocket_connect("/ws") as ws:
            ws.receive_json()
            ws.send_json(wrap("command", {"type": "drive", "ugv": "ugv0",
                                          "linear": 5.0, "angular": 0.0}))
            ack = recv_until(ws, "ack")
            assert ack["payload"]["linear"] == 0.6
            deadline = time.monotonic() + 3.0
            while time.monotonic() < deadline:
                msg = ws.receive_json()
                if msg["type"] != "snapshot":
                    continue
                cmd = msg["payload"]["ugvs"]["ugv0"]["cmd"]
                if cmd[0] == 0.6:
                    break
            else:
                raise AssertionError("clamped drive command never reached a snapshot")


def test_second_client_is_read_only(session):
    app = make_app(session, snapshot_rate=5.0)
    with TestClient(app) as client:
        with client.websocket_connect("/ws") as first:
            hello1 = first.receive_json()
            assert hello1["payload"]["driver"] is True
            with client.websocket_connect("/ws") as second:
                hello2 = second.receive_json()
                assert hello2["payload"]["driver"] is False
                second.send_json(wrap("command", {"type": "return_home"}))
                msg = recv_until(second, "error")
                assert "read-only" in msg["payload"]["reason"]


def test_driver_lock_released_on_disconnect(session):
    app = make_app(session, snapshot_rate=5.0)
    with TestClient(app) as client:
        with client.websocket_connect("/ws") as first:
            assert first.receive_json()["payload"]["driver"] is True
        with client.websocket_connect("/ws") as again:
            assert again.receive_json()["payload"]["driver"] is True


def test_transfer_command_switches_phase_within_a_tick(session):
    app = make_app(session, snapshot_rate=20.0)
    with TestClient(app) as client:
        with client.websocket_connect("/ws") as ws:
            ws.receive_json()
            # wait until tracking the first target
            deadline = time.monotonic() + 10.0
            while time.monotonic() < deadline:
                msg = ws.receive_json()
                if msg["type"] == "snapshot" and msg["payload"]["phase"].startswith("tracking"):
                    break
            ws.send_json(wrap("command", {"type": "transfer", "to": "ugv1"}))
            ack = recv_until(ws, "ack")
            assert ack["payload"] == {"type": "transfer", "to": "ugv1"}
            deadline = time.monotonic() + 2.0
            seen = None
            while time.monotonic() < deadline:
                msg = ws.receive_json()
                if msg["type"] == "snapshot" and msg["payload"]["phase"].startswith("transfer"):
                    seen = msg["payload"]["phase"]
                    break
            assert seen == "transfer:ugv0->ugv1"
