"""Deterministic scenario runner.

Single-clock fixed-step loop: physics at 100 Hz, controller/detector at
20 Hz, ground-robot localization at its scan rate. All randomness comes
from named seeded streams, no wall clock enters the loop, and every log
line is a pure function of (scenario, seed) -- identical runs produce
byte-identical JSONL logs.
"""

from __future__ import annotations

import json
import math
import threading
import time as _time
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Iterator, Optional

import numpy as np

from .dynamics import (
    ControlInput,
    MavState,
    UgvState,
    clamp_ugv_speed,
    step_mav,
    step_ugv,
)
from .metrics import MetricsAccumulator, RunMetrics, check_assertions
from .mission import (
    LANDED,
    RETURN_HOME,
    RH_DESCEND,
    RH_TRANSIT,
    SEARCHING,
    TRACKING,
    MissionExecutive,
    RobotRegistry,
    is_stable,
)
from .nmpc import NmpcController, ReferenceTrajectory, yaw_rate_command
from .rng import RngStreams
from .scenario import CONTROL_DT, PLANT_DT, PLANT_SUBSTEPS, Scenario
from .se3 import Pose, compose, invert, yaw_of
from .sensing import (
    TAG,
    DetectorConfig,
    VioState,
    detect,
    slam_pose,
    vio_step,
    visible,
)

SCHEMA_VERSION = 1


def _jsonable(obj):
    if isinstance(obj, Pose):
        return obj.to_json()
    if isinstance(obj, np.ndarray):
        return [float(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    raise TypeError(f"cannot log {type(obj)!r}")


def _round6(x: float) -> float:
    return round(float(x), 6)


class LogSink:
    """Collects normalized log entries; optionally mirrors them to a JSONL file."""

    def __init__(self, path: Optional[str] = None, keep: bool = True):
        self.entries: Optional[list] = [] if keep else None
        self._fh = open(path, "w", encoding="utf-8") if path else None

    def write(self, entry: dict) -> dict:
        """Serialize once; returns the entry as a log reader would parse it."""
        line = json.dumps(entry, sort_keys=True, separators=(",", ":"),
                          default=_jsonable)
        normalized = json.loads(line)
        if self.entries is not None:
            self.entries.append(normalized)
        if self._fh is not None:
            self._fh.write(line + "\n")
        return normalized

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None


@dataclass
class TickResult:
    t: float
    snapshot: dict


class Simulation:
    """One scenario instance stepping on the shared fixed clock."""

    def __init__(self, scenario: Scenario, seed: int, sink: Optional[LogSink] = None):
        self.scenario = scenario
        self.seed = int(seed)
        self.sink = sink if sink is not None else LogSink()
        self.streams = RngStreams(self.seed)

        self.mav = MavState.hover(np.asarray(scenario.mav_start, dtype=float))
        self.mav = replace(self.mav, yaw=scenario.mav_yaw)
        self.ugvs: dict[str, UgvState] = {
            u.id: UgvState(u.start[0], u.start[1], u.heading) for u in scenario.ugvs
        }
        home = Pose(np.asarray(scenario.home, dtype=float), np.array([1.0, 0, 0, 0]))
        self.registry = RobotRegistry(scenario.ugv_ids(), home=home,
                                      home_tag=scenario.home_tag)
        self.executive = MissionExecutive(self.registry, scenario.servo,
                                          scenario.detector.extrinsic)
        self.controller = NmpcController(scenario.mpc, scenario.mav_params)
        self._ref = ReferenceTrajectory.hold_position(self.mav.p, scenario.mpc,
                                                      scenario.mav_params)
        self._yaw_sp = scenario.mav_yaw

        offset_pose = Pose.from_rpy(np.asarray(scenario.vio.initial_offset, dtype=float),
                                    yaw=scenario.vio.initial_offset_yaw)
        self.vio = VioState.initial(self.mav.pose(), offset=offset_pose,
                                    sigma_xy=scenario.vio.sigma_xy,
                                    sigma_z=scenario.vio.sigma_z,
                                    sigma_yaw=scenario.vio.sigma_yaw)
        self._prev_mav_pose = self.mav.pose()
        self._prev_att = (self.mav.roll, self.mav.pitch)
        self._prev_degraded = False
        self._last_detection = None
        self._last_u: Optional[ControlInput] = None

        det = scenario.detector
        self._home_detector = DetectorConfig(
            regime=TAG, fov_half_angle=det.fov_half_angle, min_height=det.min_height,
            max_height=det.max_height, detect_probability=det.detect_probability,
            attempt_rate=det.attempt_rate, extrinsic=det.extrinsic,
        )

        self.tick = 0
        self.n_ticks = round(scenario.duration / CONTROL_DT)
        self._slam_every = max(1, round(1.0 / (scenario.slam.rate * CONTROL_DT)))
        self._pending_events = list(scenario.events)
        for u in scenario.ugvs:  # fold per-robot drive scripts into the event list
            for d in u.drive:
                self._pending_events.append(
                    {"t": d["t"], "type": "drive", "ugv": u.id,
                     "linear": d.get("linear", 0.0), "angular": d.get("angular", 0.0)}
                )
        self._pending_events.sort(key=lambda e: e["t"])
        self._external: list = []
        self._external_lock = threading.Lock()

        self.acc = MetricsAccumulator(scenario.servo.r_max)
        self.sink.write({
            "type": "header", "schema": SCHEMA_VERSION, "scenario": scenario.name,
            "seed": self.seed, "control_dt": CONTROL_DT, "plant_dt": PLANT_DT,
            "r_max": scenario.servo.r_max,
        })

    # -- external command interface (telemetry service) ----------------------

    def submit_command(self, cmd: dict) -> None:
        """Thread-safe enqueue; the command takes effect at the next tick."""
        with self._external_lock:
            self._external.append(cmd)

    # -- helpers --------------------------------------------------------------

    @property
    def t(self) -> float:
        return _round6(self.tick * CONTROL_DT)

    def _log(self, entry: dict) -> None:
        self.acc.consume(self.sink.write(entry))

    def _vio_adapter(self):
        sim = self

        class _Handle:
            def estimate(self):
                return sim.vio.estimate

            def apply_reset(self, new_estimate: Pose):
                sim.vio = sim.vio.with_estimate(new_estimate, sim.mav.pose())

        return _Handle()

    def _detection_target(self):
        phase = self.executive.phase
        if phase.kind in (TRACKING, SEARCHING):
            uid = phase.target
            return uid, self.ugvs[uid].pose(), self.scenario.detector, f"detect/{uid}"
        if phase.kind == RETURN_HOME and phase.stage != RH_TRANSIT \
                and self.registry.home_tag:
            return "home", self.registry.home, self._home_detector, "detect/home"
        return None

    def _apply_command(self, cmd: dict, source: str, t: float) -> None:
        kind = cmd.get("type")
        try:
            if kind == "drive":
                uid = cmd["ugv"]
                if uid not in self.ugvs:
                    raise KeyError(f"unknown ugv: {uid}")
                lin = clamp_ugv_speed(float(cmd.get("linear", 0.0)))
                ang = float(cmd.get("angular", 0.0))
                self.ugvs[uid] = self.ugvs[uid].with_command(lin, ang)
            elif kind == "transfer":
                self.executive.request_transfer(cmd["to"], t)
            elif kind == "return_home":
                self.executive.request_return_home(t)
            elif kind == "set_offset":
                self.executive.set_offset(cmd.get("v", (0.0, 0.0, 0.0)))
            elif kind == "displace":
                # physical teleport with coherent odometry (flown-there injection)
                off = np.zeros(3)
                vals = cmd.get("offset", (0.0, 0.0, 0.0))
                off[: len(vals)] = vals
                self.mav = replace(self.mav, p=self.mav.p + off)
                truth = self.mav.pose()
                self.vio = self.vio.with_estimate(compose(self.vio.drift, truth), truth)
                self._prev_mav_pose = truth
            elif kind == "drift":
                # estimate-side injection: the world estimate jumps, truth stays
                off = np.zeros(3)
                vals = cmd.get("offset", (0.0, 0.0, 0.0))
                off[: len(vals)] = vals
                shift = Pose(off, np.array([1.0, 0.0, 0.0, 0.0]))
                self.vio = self.vio.with_estimate(
                    compose(shift, self.vio.estimate), self.mav.pose())
            else:
                raise ValueError(f"unknown command type: {kind}")
        except (KeyError, ValueError, RuntimeError) as exc:
            self._log({"type": "command", "t": t, "tick": self.tick, "cmd": cmd,
                       "source": source, "rejected": str(exc)})
            return
        self._log({"type": "command", "t": t, "tick": self.tick, "cmd": cmd,
                   "source": source})

    def _drain_executive_events(self, t: float) -> None:
        for ev in self.executive.events:
            entry = {"type": "event", "tick": self.tick, **ev}
            if ev["event"] == "transfer_arrival":
                est = self.vio.estimate.translation
                true = self.mav.p
                entry["est"] = [float(v) for v in est]
                entry["true"] = [float(v) for v in true]
                entry["displacement"] = float(np.hypot(est[0] - true[0], est[1] - true[1]))
            if ev["event"] == "landed":
                home = self.registry.home.translation
                entry["offset"] = float(np.hypot(self.mav.p[0] - home[0],
                                                 self.mav.p[1] - home[1]))
            self._log(entry)
        self.executive.events.clear()

    def _tracking_error(self) -> Optional[float]:
        """True planar distance to the offset hover point above the tracked UGV."""
        phase = self.executive.phase
        if phase.kind != TRACKING:
            return None
        ugv = self.ugvs[phase.target]
        anchor = ugv.pose().apply(self.executive.t_offset)
        return float(np.hypot(self.mav.p[0] - anchor[0], self.mav.p[1] - anchor[1]))

    # -- main loop -------------------------------------------------------------

    def step_tick(self) -> TickResult:
        t = self.t
        scen = self.scenario

        # ground-robot localization updates on the scan clock
        if self.tick % self._slam_every == 0:
            for uid in scen.ugv_ids():
                est = slam_pose(self.ugvs[uid].pose(), scen.slam,
                                self.streams.get(f"slam/{uid}"))
                self.registry.update(uid, est, t)
                self._log({"type": "slam", "t": t, "tick": self.tick, "id": uid,
                           "pose": est})

        # odometry propagates the true motion since the previous tick
        if self.tick > 0:
            cur = self.mav.pose()
            inc = compose(invert(self._prev_mav_pose), cur)
            self.vio = vio_step(self.vio, inc, CONTROL_DT, self.streams.get("vio"))
            self._prev_mav_pose = cur

        # commands take effect at tick boundaries, in arrival order
        while self._pending_events and self._pending_events[0]["t"] <= t + 1e-9:
            ev = self._pending_events.pop(0)
            cmd = {k: v for k, v in ev.items() if k != "t"}
            self._apply_command(cmd, "script", t)
        with self._external_lock:
            external, self._external = self._external, []
        for cmd in external:
            self._apply_command(cmd, "client", t)

        # one detection attempt per tick against the active target
        detection = None
        target_info = self._detection_target()
        vis = False
        if target_info is not None:
            tid, target_pose, det_cfg, stream = target_info
            vis = visible(self.mav.pose(), target_pose, det_cfg)
            detection = detect(self.mav.pose(), target_pose, det_cfg,
                               self.streams.get(stream), t)
            if detection is not None:
                self._log({"type": "detection", "t": t, "tick": self.tick,
                           "target": tid, "regime": detection.regime,
                           "rel": detection.rel_camera})
        self._last_detection = detection

        att_rates = (
            (self.mav.roll - self._prev_att[0]) / CONTROL_DT,
            (self.mav.pitch - self._prev_att[1]) / CONTROL_DT,
        )
        self._prev_att = (self.mav.roll, self.mav.pitch)
        stable = is_stable(self.mav, scen.servo, self._prev_degraded, att_rates)

        phase_before = self.executive.phase.label()
        setpoint = self.executive.update(detection, self._vio_adapter(), stable, t)
        if setpoint is not None:
            self._ref = ReferenceTrajectory.hold_position(setpoint.position, scen.mpc,
                                                          scen.mav_params)
            self._yaw_sp = setpoint.yaw

        # touchdown detection while descending
        if (self.executive.phase.kind == RETURN_HOME
                and self.executive.phase.stage == RH_DESCEND
                and self.mav.p[2] <= scen.servo.land_height):
            self.executive.mark_landed(t)
        self._drain_executive_events(t)
        phase_after = self.executive.phase.label()
        if phase_after != phase_before:
            self._log({"type": "event", "t": t, "tick": self.tick, "event": "phase",
                       "from": phase_before, "to": phase_after})

        # control and physics
        landed = self.executive.phase.kind == LANDED
        if not landed:
            est = self.vio.estimate
            x0 = np.concatenate([
                est.translation,
                self.vio.drift.rotation_matrix() @ self.mav.v,
                [self.mav.roll, self.mav.pitch],
            ])
            res = self.controller.solve(x0, yaw_of(est), self._ref)
            self._prev_degraded = res.degraded
            yaw_rate = yaw_rate_command(yaw_of(est), self._yaw_sp)
            u = ControlInput(res.input.roll_cmd, res.input.pitch_cmd,
                             res.input.thrust, yaw_rate).clamped(scen.mav_params)
            self._last_u = u
            self.mav = step_mav(self.mav, u, scen.mav_params, PLANT_DT, PLANT_SUBSTEPS)
        for uid in scen.ugv_ids():
            s = self.ugvs[uid]
            for _ in range(PLANT_SUBSTEPS):
                s = step_ugv(s, PLANT_DT)
            self.ugvs[uid] = s

        snapshot = self.sink.write(self._snapshot(t, vis, stable))
        self.acc.consume(snapshot)
        self.tick += 1
        return TickResult(t, snapshot)

    def _snapshot(self, t: float, vis: bool, stable: bool) -> dict:
        est = self.vio.estimate
        phase = self.executive.phase
        snap = {
            "type": "snapshot", "schema": SCHEMA_VERSION, "t": t, "tick": self.tick,
            "phase": phase.label(),
            "mav": {
                "true": self.mav.pose(), "est": est,
                "v": self.mav.v, "roll": self.mav.roll, "pitch": self.mav.pitch,
                "yaw": self.mav.yaw,
            },
            "ugvs": {
                uid: {"true": [s.x, s.y, s.heading],
                      "slam": self.registry.get(uid).pose,
                      "cmd": [clamp_ugv_speed(s.cmd_linear), s.cmd_angular]}
                for uid, s in self.ugvs.items()
            },
            "setpoint": {"p": self._ref.x_ref[0, 0:3], "yaw": self._yaw_sp},
            "offset": self.executive.t_offset,
            "stable": stable,
            "degraded": self._prev_degraded,
            "vis": vis,
            "detection": (self._last_detection.rel_camera
                          if self._last_detection else None),
            "r_err": self._tracking_error(),
            "metrics": self.acc.snapshot_metrics(),
        }
        if phase.kind == "transfer":
            snap["waypoint"] = list(phase.waypoint)
        return snap

    def done(self) -> bool:
        return self.tick >= self.n_ticks

    def run(self, on_tick: Optional[Callable[[TickResult], None]] = None) -> RunMetrics:
        while not self.done():
            result = self.step_tick()
            if on_tick is not None:
                on_tick(result)
        metrics = self.acc.finalize()
        self._log({"type": "metrics", "t": self.t, "values": metrics.to_json()})
        return metrics


def run_scenario(scenario: Scenario, seed: int, log_path: Optional[str] = None,
                 keep_log: bool = True) -> tuple:
    """Run to completion; returns (metrics, log entries, assertion failures)."""
    sink = LogSink(log_path, keep=keep_log)
    sim = Simulation(scenario, seed, sink)
    try:
        metrics = sim.run()
    finally:
        sink.close()
    failures = check_assertions(metrics, scenario.assertions)
    return metrics, sink.entries, failures


def read_log(path) -> Iterator[dict]:
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield json.loads(line)


def compute_metrics(entries: Iterable[dict]) -> RunMetrics:
    """Recompute run metrics from a log stream (file entries or dicts)."""
    acc = None
    for entry in entries:
        if entry.get("type") == "header":
            if entry.get("schema") != SCHEMA_VERSION:
                raise ValueError(
                    f"log schema {entry.get('schema')} != {SCHEMA_VERSION}")
            acc = MetricsAccumulator(r_max=float(entry["r_max"]))
            continue
        if acc is None:
            raise ValueError("log does not start with a header: truncated or corrupt")
        acc.consume(entry)
    if acc is None:
        raise ValueError("empty log")
    return acc.finalize()


def replay(entries: Iterable[dict], speed: float = 0.0,
           sleep=_time.sleep) -> Iterator[dict]:
    """Re-emit snapshots from a log without re-simulation.

    speed > 0 paces the stream at that multiple of real time; speed == 0
    yields a paused (empty) stream.
    """
    if speed < 0:
        raise ValueError("speed must be >= 0")
    if speed == 0:
        return iter(())

    def _gen():
        prev_t = None
        seen_header = False
        for entry in entries:
            if entry.get("type") == "header":
                if entry.get("schema") != SCHEMA_VERSION:
                    raise ValueError(
                        f"log schema {entry.get('schema')} != {SCHEMA_VERSION}")
                seen_header = True
            if entry.get("type") != "snapshot":
                continue
            if not seen_header:
                raise ValueError("snapshot before header: truncated or corrupt log")
            if prev_t is not None and speed != math.inf:
                sleep(max(0.0, (entry["t"] - prev_t) / speed))
            prev_t = entry["t"]
            yield entry

    return _gen()
