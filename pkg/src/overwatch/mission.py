"""Servoing mission executive.

State machine driving the overhead support flight: hover-hold above the
tracked ground vehicle, recovery climb on detection loss, waypoint
transfer between vehicles, and return-home with optional tag-corrected
landing.

The hover setpoint uses a deadband: inside the tolerance circle of
radius `r_max` around the point above the target no new position is
commanded, which keeps the overhead image steady instead of chasing
every detection. Setpoints are only emitted while the vehicle is stable
(low speed, low attitude rates, healthy solver); on target-switch events
the world estimate is reset onto the ground vehicle's own localization.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Protocol

import numpy as np

from .se3 import (
    Pose,
    compose,
    relative_between_ugvs,
    reset_mav_world,
    yaw_of,
)


@dataclass(frozen=True)
class ServoConfig:
    hover_height: float = 2.0  # m above the target
    r_max: float = 0.2  # m, on-station tolerance radius (deadband)
    t_offset: tuple = (0.0, 0.0, 0.0)  # m, operator offset in UGV body frame
    detection_timeout: float = 1.0  # s without detections before searching
    transit_height: float = 2.5  # m, transfer/return cruise altitude
    search_height: float = 4.5  # m, climb target on loss; margin under the 5 m window
    stable_speed_max: float = 0.4  # m/s
    stable_att_rate_max: float = 0.5  # rad/s
    descend_trigger: float = 0.2  # m planar error allowed before final descent
    descent_rate: float = 0.5  # m/s, landing ramp (keeps lateral authority)
    land_height: float = 0.05  # m, touchdown threshold

    def __post_init__(self):
        if self.r_max <= 0:
            raise ValueError("r_max must be positive")
        if self.hover_height <= 0:
            raise ValueError("hover height must be positive")


IDLE = "idle"
TRACKING = "tracking"
SEARCHING = "searching"
TRANSFER = "transfer"
RETURN_HOME = "return_home"
LANDED = "landed"

# return-home stages
RH_TRANSIT = "transit"
RH_SERVO = "servo"
RH_DESCEND = "descend"


@dataclass(frozen=True)
class MissionPhase:
    kind: str
    target: Optional[str] = None  # tracked/searched UGV id
    source: Optional[str] = None  # transfer origin (None when launched from idle)
    waypoint: Optional[tuple] = None  # transfer waypoint (x, y, z)
    stage: Optional[str] = None  # return-home stage

    @staticmethod
    def idle() -> "MissionPhase":
        return MissionPhase(IDLE)

    @staticmethod
    def tracking(target: str) -> "MissionPhase":
        return MissionPhase(TRACKING, target=target)

    @staticmethod
    def searching(target: str) -> "MissionPhase":
        return MissionPhase(SEARCHING, target=target)

    @staticmethod
    def transfer(source: Optional[str], target: str, waypoint) -> "MissionPhase":
        return MissionPhase(TRANSFER, target=target, source=source,
                            waypoint=tuple(float(v) for v in waypoint))

    @staticmethod
    def return_home(stage: str) -> "MissionPhase":
        return MissionPhase(RETURN_HOME, stage=stage)

    @staticmethod
    def landed() -> "MissionPhase":
        return MissionPhase(LANDED)

    def label(self) -> str:
        if self.kind == TRACKING or self.kind == SEARCHING:
            return f"{self.kind}:{self.target}"
        if self.kind == TRANSFER:
            return f"transfer:{self.source or '-'}->{self.target}"
        if self.kind == RETURN_HOME:
            return f"return_home:{self.stage}"
        return self.kind


@dataclass
class RobotEstimate:
    pose: Pose
    time: float


class RobotRegistry:
    """World estimates of the ground robots plus the home definition.

    Every robot starts registered at the world origin at t = 0; the first
    localization update overwrites the placeholder.
    """

    def __init__(self, robot_ids, home: Pose = None, home_tag: bool = False):
        self.estimates: dict[str, RobotEstimate] = {
            rid: RobotEstimate(Pose.identity(), 0.0) for rid in robot_ids
        }
        self.home = home if home is not None else Pose.identity()
        self.home_tag = home_tag

    def known(self, robot_id: str) -> bool:
        return robot_id in self.estimates

    def update(self, robot_id: str, pose: Pose, t: float) -> None:
        if robot_id not in self.estimates:
            raise KeyError(f"unregistered robot: {robot_id}")
        prev = self.estimates[robot_id]
        if t < prev.time:
            raise ValueError("localization update stamped before the previous one")
        self.estimates[robot_id] = RobotEstimate(pose, t)

    def get(self, robot_id: str) -> RobotEstimate:
        if robot_id not in self.estimates:
            raise KeyError(f"unregistered robot: {robot_id}")
        return self.estimates[robot_id]


@dataclass(frozen=True)
class Setpoint:
    position: np.ndarray  # (3,) world (estimate frame)
    yaw: float
    held: bool = False  # True when the deadband kept the previous position

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(3))


def compute_setpoint(rel_world: Pose, mav_est: Pose, cfg: ServoConfig,
                     prev: Optional[Setpoint] = None,
                     t_offset=None) -> Setpoint:
    """Hover setpoint above the detected target.

    `rel_world` is the target pose relative to the MAV body (extrinsic
    composed with the camera-frame detection); `mav_est` the current world
    estimate. The commanded point is the target center shifted by the
    body-frame operator offset and lifted by the hover height; inside the
    r_max circle the previous position is held (no correction).
    """
    offset = np.asarray(cfg.t_offset if t_offset is None else t_offset, dtype=float)
    target_world = compose(mav_est, rel_world)
    target_yaw = yaw_of(target_world)
    anchor = target_world.translation + Pose.from_rpy(np.zeros(3), yaw=target_yaw).apply(offset)
    position = anchor + np.array([0.0, 0.0, cfg.hover_height])
    planar_err = float(np.hypot(*(mav_est.translation[:2] - position[:2])))
    if prev is not None and planar_err <= cfg.r_max:
        return Setpoint(prev.position, target_yaw, held=True)
    return Setpoint(position, target_yaw, held=False)


def is_stable(state, cfg: ServoConfig, solver_degraded: bool = False,
              att_rates: tuple = (0.0, 0.0)) -> bool:
    """Gate for sending control action: slow, level-rate, and solver healthy."""
    if solver_degraded:
        return False
    if float(np.linalg.norm(state.v)) > cfg.stable_speed_max:
        return False
    return max(abs(att_rates[0]), abs(att_rates[1])) <= cfg.stable_att_rate_max


class VioHandle(Protocol):
    """What the executive needs from the odometry: read and overwrite the estimate."""

    def estimate(self) -> Pose: ...

    def apply_reset(self, new_estimate: Pose) -> None: ...


class MissionExecutive:
    """Owns the mission phase and turns detections into setpoint commands.

    Driven once per control tick by the simulation loop; external commands
    (transfer, return-home, offset change) arrive between ticks through
    `request_transfer`, `request_return_home` and `set_offset`.
    """

    def __init__(self, registry: RobotRegistry, cfg: ServoConfig,
                 camera_extrinsic: Pose):
        self.registry = registry
        self.cfg = cfg
        self.extrinsic = camera_extrinsic
        self.phase = MissionPhase.idle()
        self.t_offset = np.asarray(cfg.t_offset, dtype=float)
        self._setpoint: Optional[Setpoint] = None
        self._last_rel: Optional[Pose] = None  # target relative to MAV body
        self._last_det_time: Optional[float] = None
        self._reset_pending = False
        self._reset_request: Optional[Pose] = None
        self._descend_from: Optional[tuple] = None  # (x, y, z_start, t_start)
        self.events: list = []

    # -- external commands -------------------------------------------------

    def request_transfer(self, to: str, t: float) -> MissionPhase:
        """Begin a transfer toward `to`; applies the world reset when tracking."""
        if not self.registry.known(to):
            raise KeyError(f"unknown transfer target: {to}")
        if self.phase.kind == TRANSFER:
            raise RuntimeError("transfer already active")
        if self.phase.kind not in (IDLE, TRACKING):
            raise RuntimeError(f"cannot transfer from phase {self.phase.kind}")
        if self.phase.kind == TRACKING and self.phase.target == to:
            return self.phase
        source = self.phase.target
        self._reset_request = None
        if self.phase.kind == TRACKING and self._last_rel is not None:
            # transition event: align the world estimate on the tracked UGV
            slam = self.registry.get(self.phase.target).pose
            self._reset_request = reset_mav_world(slam, self._last_rel)
        if source is not None:
            # route through the inter-UGV relative transform
            t_from = self.registry.get(source).pose
            target_world = compose(t_from, relative_between_ugvs(
                t_from, self.registry.get(to).pose))
            waypoint = target_world.translation.copy()
        else:
            waypoint = self.registry.get(to).pose.translation.copy()
        waypoint[2] += self.cfg.transit_height
        self.phase = MissionPhase.transfer(source, to, waypoint)
        self._setpoint = None
        self._last_rel = None
        self._last_det_time = None
        self._note(0.0 if t is None else t, "transfer_requested", source=source, target=to)
        return self.phase

    def request_return_home(self, t: float) -> MissionPhase:
        if self.phase.kind == RETURN_HOME:
            raise RuntimeError("already returning home")
        self.phase = MissionPhase.return_home(RH_TRANSIT)
        self._setpoint = None
        self._last_rel = None
        self._last_det_time = None
        self._note(t, "return_home_requested")
        return self.phase

    def set_offset(self, offset) -> None:
        self.t_offset = np.asarray(offset, dtype=float).reshape(3)

    # -- per-tick update ----------------------------------------------------

    def update(self, detection, vio: VioHandle, stable: bool, t: float):
        """Advance the state machine one tick.

        Returns the setpoint to command, or None to hold the previous one.
        Commands are emitted only while `stable` holds.
        """
        if self._reset_request is not None:
            vio.apply_reset(self._reset_request)
            self._note(t, "frame_reset", context="transfer")
            self._reset_request = None

        kind = self.phase.kind
        if kind == IDLE or kind == LANDED:
            return None
        if kind == TRACKING:
            return self._update_tracking(detection, vio, stable, t)
        if kind == SEARCHING:
            return self._update_searching(detection, vio, stable, t)
        if kind == TRANSFER:
            return self._update_transfer(vio, stable, t)
        if kind == RETURN_HOME:
            return self._update_return_home(detection, vio, stable, t)
        raise RuntimeError(f"unhandled phase {kind}")

    # -- phase handlers -----------------------------------------------------

    def _update_tracking(self, detection, vio, stable, t):
        cfg = self.cfg
        if detection is not None:
            self._last_rel = compose(self.extrinsic, detection.rel_camera)
            self._last_det_time = t
            if self._reset_pending and stable:
                slam = self.registry.get(self.phase.target).pose
                vio.apply_reset(reset_mav_world(slam, self._last_rel))
                self._reset_pending = False
                self._note(t, "frame_reset", context="acquisition")
        elif (self._last_det_time is None
              or t - self._last_det_time > cfg.detection_timeout):
            self.phase = MissionPhase.searching(self.phase.target)
            self._note(t, "detection_lost", target=self.phase.target)
            self._setpoint = None
            return self._update_searching(None, vio, stable, t)
        if self._last_rel is None:
            return None
        sp = compute_setpoint(self._last_rel, vio.estimate(), cfg,
                              prev=self._setpoint, t_offset=self.t_offset)
        if not stable:
            return None
        self._setpoint = sp
        return sp

    def _search_setpoint(self, vio) -> Setpoint:
        est = self.registry.get(self.phase.target)
        pos = est.pose.translation.copy()
        pos[2] += self.cfg.search_height
        return Setpoint(pos, yaw_of(vio.estimate()))

    def _update_searching(self, detection, vio, stable, t):
        if detection is not None:
            self.phase = MissionPhase.tracking(self.phase.target)
            self._reset_pending = True
            # never let the deadband hold a search/transit setpoint: the first
            # tracking command must place the hover point afresh
            self._setpoint = None
            self._note(t, "acquired", target=self.phase.target)
            return self._update_tracking(detection, vio, stable, t)
        sp = self._search_setpoint(vio)
        if not stable:
            return None
        self._setpoint = sp
        return sp

    def _update_transfer(self, vio, stable, t):
        wp = np.asarray(self.phase.waypoint)
        est = vio.estimate()
        planar = float(np.hypot(*(est.translation[:2] - wp[:2])))
        if planar <= self.cfg.r_max:
            target = self.phase.target
            self._note(t, "transfer_arrival", target=target)
            self.phase = MissionPhase.searching(target)
            self._setpoint = None
            return self._update_searching(None, vio, stable, t)
        sp = Setpoint(wp, yaw_of(est))
        if not stable:
            return None
        self._setpoint = sp
        return sp

    def _update_return_home(self, detection, vio, stable, t):
        cfg = self.cfg
        est = vio.estimate()
        home = self.registry.home
        stage = self.phase.stage
        if stage == RH_TRANSIT:
            wp = home.translation + np.array([0.0, 0.0, cfg.transit_height])
            planar = float(np.hypot(*(est.translation[:2] - wp[:2])))
            if planar <= cfg.r_max:
                next_stage = RH_SERVO if self.registry.home_tag else RH_DESCEND
                if next_stage == RH_DESCEND:
                    # blind landing descends over the commanded point, not the
                    # (up to r_max off) arrival estimate
                    self._descend_from = (float(wp[0]), float(wp[1]),
                                          float(est.translation[2]), t)
                self.phase = MissionPhase.return_home(next_stage)
                self._note(t, "home_reached", stage=next_stage)
                self._setpoint = None
                return self._update_return_home(detection, vio, stable, t)
            sp = Setpoint(wp, yaw_of(est))
        elif stage == RH_SERVO:
            if detection is not None:
                self._last_rel = compose(self.extrinsic, detection.rel_camera)
            if self._last_rel is None:
                return None
            sp = compute_setpoint(self._last_rel, est, cfg, prev=self._setpoint,
                                  t_offset=(0.0, 0.0, 0.0))
            target_world = compose(est, self._last_rel)
            planar = float(np.hypot(*(est.translation[:2] - target_world.translation[:2])))
            if planar <= cfg.descend_trigger:
                # descend over the tag-derived center
                self._descend_from = (float(target_world.translation[0]),
                                      float(target_world.translation[1]),
                                      float(est.translation[2]), t)
                self.phase = MissionPhase.return_home(RH_DESCEND)
                self._note(t, "descending", corrected=True)
                return self._update_return_home(None, vio, stable, t)
        else:  # RH_DESCEND: ramp the altitude down over the anchored point
            if self._descend_from is None:
                anchor = self._setpoint.position[:2] if self._setpoint is not None \
                    else est.translation[:2]
                self._descend_from = (float(anchor[0]), float(anchor[1]),
                                      float(est.translation[2]), t)
            ax, ay, z0, t0 = self._descend_from
            z_sp = max(0.0, z0 - cfg.descent_rate * (t - t0))
            sp = Setpoint(np.array([ax, ay, z_sp]), yaw_of(est))
        if not stable:
            return None
        self._setpoint = sp
        return sp

    def mark_landed(self, t: float) -> None:
        self.phase = MissionPhase.landed()
        self._note(t, "landed")

    def _note(self, t, kind, **data):
        self.events.append({"t": t, "event": kind, **data})
