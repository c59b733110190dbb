"""Operator-console service: snapshot broadcast plus command injection.

One authoritative simulation runs per service process, paced to the wall
clock in a background thread. Any number of read-only viewers may
connect over WebSocket; a single driver session (first come, first
served) may send commands. Commands are validated, range-clamped, and
enqueued for the next simulation tick, so interactive sessions stay
replayable from the run log.

Wire protocol (JSON over WebSocket, envelope {v, type, payload}): see
docs/protocol.md.
"""

from __future__ import annotations

import asyncio
import json
import threading
import time
from typing import Optional

from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .dynamics import UGV_MAX_SPEED
from .harness import LogSink, Simulation
from .scenario import CONTROL_DT, Scenario

PROTOCOL_VERSION = 1
UGV_MAX_TURN_RATE = 1.5  # rad/s, server-side clamp


class CommandRejected(ValueError):
    pass


def validate_command(raw: dict, known_ugvs) -> dict:
    """Schema-check and range-clamp one operator command."""
    if not isinstance(raw, dict):
        raise CommandRejected("command must be an object")
    kind = raw.get("type")
    if kind == "drive":
        ugv = raw.get("ugv")
        if ugv not in known_ugvs:
            raise CommandRejected(f"unknown robot id: {ugv!r}")
        try:
            linear = float(raw.get("linear", 0.0))
            angular = float(raw.get("angular", 0.0))
        except (TypeError, ValueError):
            raise CommandRejected("drive magnitudes must be numbers") from None
        linear = min(max(linear, -UGV_MAX_SPEED), UGV_MAX_SPEED)
        angular = min(max(angular, -UGV_MAX_TURN_RATE), UGV_MAX_TURN_RATE)
        return {"type": "drive", "ugv": ugv, "linear": linear, "angular": angular}
    if kind == "transfer":
        to = raw.get("to")
        if to not in known_ugvs:
            raise CommandRejected(f"unknown robot id: {to!r}")
        return {"type": "transfer", "to": to}
    if kind == "return_home":
        return {"type": "return_home"}
    if kind == "set_offset":
        vec = raw.get("v", (0.0, 0.0, 0.0))
        if not (isinstance(vec, (list, tuple)) and len(vec) == 3):
            raise CommandRejected("set_offset needs a 3-vector v")
        try:
            vec = [float(x) for x in vec]
        except (TypeError, ValueError):
            raise CommandRejected("offset components must be numbers") from None
        return {"type": "set_offset", "v": vec}
    raise CommandRejected(f"unknown command type: {kind!r}")


class SimSession:
    """Background thread stepping one simulation at wall-clock pace."""

    def __init__(self, scenario: Scenario, seed: int, log_path: Optional[str] = None,
                 pace: float = 1.0):
        self.scenario = scenario
        self.sim = Simulation(scenario, seed, LogSink(log_path, keep=False))
        self.pace = pace
        self._latest: Optional[dict] = None
        self._lock = threading.Lock()
        self._stop = threading.Event()
        self._thread: Optional[threading.Thread] = None

    def start(self) -> None:
        self._thread = threading.Thread(target=self._run, daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=2.0)
        self.sim.sink.close()

    def _run(self) -> None:
        period = CONTROL_DT / self.pace
        deadline = time.monotonic()
        while not self._stop.is_set() and not self.sim.done():
            result = self.sim.step_tick()
            with self._lock:
                self._latest = result.snapshot
            deadline += period
            delay = deadline - time.monotonic()
            if delay > 0:
                self._stop.wait(delay)
            else:
                deadline = time.monotonic()  # fell behind: do not burst

    def latest_snapshot(self) -> Optional[dict]:
        with self._lock:
            return self._latest

    def submit(self, cmd: dict) -> None:
        self.sim.submit_command(cmd)

    def ugv_ids(self):
        return self.scenario.ugv_ids()


def make_app(session: SimSession, snapshot_rate: float = 20.0,
             static_dir: Optional[str] = None) -> FastAPI:
    app = FastAPI()
    state = {"driver": None, "next_client": 0}

    def envelope(kind: str, payload) -> str:
        return json.dumps({"v": PROTOCOL_VERSION, "type": kind, "payload": payload},
                          separators=(",", ":"))

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        client_id = state["next_client"]
        state["next_client"] += 1
        outbox: asyncio.Queue = asyncio.Queue(maxsize=4)

        def push(message: str) -> None:
            # per-client backpressure: drop the oldest snapshot, never block
            while True:
                try:
                    outbox.put_nowait(message)
                    return
                except asyncio.QueueFull:
                    try:
                        outbox.get_nowait()
                    except asyncio.QueueEmpty:
                        pass

        push(envelope("hello", {
            "scenario": session.scenario.name,
            "seed": session.sim.seed,
            "rate": snapshot_rate,
            "ugvs": list(session.ugv_ids()),
            "r_max": session.scenario.servo.r_max,
            "hover_height": session.scenario.servo.hover_height,
            "home": list(session.scenario.home),
            "driver": state["driver"] is None,
        }))
        if state["driver"] is None:
            state["driver"] = client_id

        async def pump_snapshots():
            last_tick = -1
            while True:
                snap = session.latest_snapshot()
                if snap is not None and snap["tick"] != last_tick:
                    last_tick = snap["tick"]
                    push(envelope("snapshot", snap))
                await asyncio.sleep(1.0 / snapshot_rate)

        async def pump_outbox():
            while True:
                await ws.send_text(await outbox.get())

        senders = [asyncio.create_task(pump_snapshots()),
                   asyncio.create_task(pump_outbox())]
        try:
            while True:
                raw = await ws.receive_text()
                try:
                    msg = json.loads(raw)
                except json.JSONDecodeError:
                    push(envelope("error", {"reason": "not JSON"}))
                    continue
                if not isinstance(msg, dict) or msg.get("v") != PROTOCOL_VERSION:
                    push(envelope("error", {"reason": "bad envelope version"}))
                    continue
                kind = msg.get("type")
                if kind == "ping":
                    push(envelope("pong", msg.get("payload")))
                elif kind == "command":
                    if state["driver"] != client_id:
                        push(envelope("error", {"reason": "read-only session"}))
                        continue
                    try:
                        cmd = validate_command(msg.get("payload"), session.ugv_ids())
                    except CommandRejected as exc:
                        push(envelope("error", {"reason": str(exc)}))
                        continue
                    session.submit(cmd)
                    push(envelope("ack", cmd))
                else:
                    push(envelope("error", {"reason": f"unknown type {kind!r}"}))
        except WebSocketDisconnect:
            pass
        finally:
            for task in senders:
                task.cancel()
            if state["driver"] == client_id:
                state["driver"] = None

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True), name="console")

    return app


def serve(scenario: Scenario, seed: int, host: str, port: int,
          snapshot_rate: float = 20.0, log_path: Optional[str] = None,
          static_dir: Optional[str] = None) -> None:
    """Run the service until interrupted (blocking)."""
    import uvicorn

    session = SimSession(scenario, seed, log_path=log_path)
    session.start()
    app = make_app(session, snapshot_rate=snapshot_rate, static_dir=static_dir)
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    finally:
        session.stop()
