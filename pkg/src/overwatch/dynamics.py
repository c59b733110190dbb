"""Ground-truth vehicle plants.

Multirotor: flat-earth point mass with thrust rotated by attitude and a
first-order inner loop tracking commanded roll/pitch (the low-level
attitude controller is subsumed into that lag). Yaw is driven by a rate
command, kept outside the position-control input vector. Integration is
RK4 on a fixed plant step.

Angle conventions follow the ZYX Euler convention with z-up and
x-forward: positive pitch tips the nose down and accelerates +x,
positive roll accelerates -y.

Ground vehicle: planar unicycle with the commanded speed hard-clamped at
the vehicle's 0.6 m/s limit; integration is exact for piecewise-constant
commands.

Default multirotor parameters are plausible for a small hexacopter but
are not measured values; scenarios may override all of them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .se3 import Pose

UGV_MAX_SPEED = 0.6  # m/s, vehicle hard limit


@dataclass(frozen=True)
class MavParams:
    mass: float = 2.9  # kg
    gravity: float = 9.81  # m/s^2
    tau_att: float = 0.15  # s, roll/pitch inner-loop time constant
    tau_yaw: float = 0.3  # s (unused by the rate-driven yaw channel, kept for tuning)
    att_limit: float = math.radians(30.0)  # rad
    thrust_min: float = 0.0  # N
    thrust_max: float = None  # N, defaults to twice the hover thrust
    drag: float = 0.05  # 1/s, linear velocity drag

    def __post_init__(self):
        if self.mass <= 0 or self.gravity <= 0 or self.tau_att <= 0 or self.tau_yaw <= 0:
            raise ValueError("mass, gravity and time constants must be positive")
        if self.thrust_max is None:
            object.__setattr__(self, "thrust_max", 2.0 * self.mass * self.gravity)
        if self.thrust_max <= self.thrust_min:
            raise ValueError("empty thrust range")

    @property
    def hover_thrust(self) -> float:
        return self.mass * self.gravity


@dataclass(frozen=True)
class MavState:
    """Multirotor state: position, velocity, roll, pitch (plus yaw alongside)."""

    p: np.ndarray  # (3,) m
    v: np.ndarray  # (3,) m/s
    roll: float = 0.0
    pitch: float = 0.0
    yaw: float = 0.0

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float).reshape(3)
        v = np.asarray(self.v, dtype=float).reshape(3)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "v", v)
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(v))
                and math.isfinite(self.roll) and math.isfinite(self.pitch)
                and math.isfinite(self.yaw)):
            raise ValueError("non-finite state")

    @staticmethod
    def hover(p) -> "MavState":
        return MavState(np.asarray(p, dtype=float), np.zeros(3))

    def as_vector9(self) -> np.ndarray:
        return np.concatenate([self.p, self.v, [self.roll, self.pitch, self.yaw]])

    def as_vector8(self) -> np.ndarray:
        return np.concatenate([self.p, self.v, [self.roll, self.pitch]])

    @staticmethod
    def from_vector9(x: np.ndarray) -> "MavState":
        x = np.asarray(x, dtype=float)
        return MavState(x[0:3], x[3:6], float(x[6]), float(x[7]), float(x[8]))

    def pose(self) -> Pose:
        return Pose.from_rpy(self.p, self.roll, self.pitch, self.yaw)


@dataclass(frozen=True)
class ControlInput:
    """Position-controller output plus the separate yaw-rate channel."""

    roll_cmd: float
    pitch_cmd: float
    thrust: float
    yaw_rate_cmd: float = 0.0

    def clamped(self, params: MavParams, yaw_rate_limit: float = 1.5) -> "ControlInput":
        lim = params.att_limit
        return ControlInput(
            min(max(self.roll_cmd, -lim), lim),
            min(max(self.pitch_cmd, -lim), lim),
            min(max(self.thrust, params.thrust_min), params.thrust_max),
            min(max(self.yaw_rate_cmd, -yaw_rate_limit), yaw_rate_limit),
        )

    def as_vector4(self) -> np.ndarray:
        return np.array([self.roll_cmd, self.pitch_cmd, self.thrust, self.yaw_rate_cmd])

    @staticmethod
    def hover(params: MavParams) -> "ControlInput":
        return ControlInput(0.0, 0.0, params.hover_thrust, 0.0)


def step_mav(s: MavState, u: ControlInput, params: MavParams, dt: float,
             substeps: int = 1) -> MavState:
    """Advance the multirotor plant by `substeps` RK4 steps of size `dt`."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    x = _kernels.plant_step(
        s.as_vector9(), u.as_vector4(),
        params.mass, params.gravity, params.tau_att, params.drag,
        dt, substeps,
    )
    return MavState.from_vector9(x)


def sensed_state(s: MavState) -> MavState:
    """Measurement fed back to the controllers.

    Pass-through at the plant level; estimation error is modeled in the
    sensing layer, not here.
    """
    return s


@dataclass(frozen=True)
class UgvState:
    """Planar tracked-vehicle state with its current drive command."""

    x: float = 0.0
    y: float = 0.0
    heading: float = 0.0
    cmd_linear: float = 0.0  # m/s, clamped on use
    cmd_angular: float = 0.0  # rad/s

    def pose(self) -> Pose:
        return Pose.from_xy_yaw(self.x, self.y, self.heading)

    def with_command(self, linear: float, angular: float) -> "UgvState":
        return replace(self, cmd_linear=linear, cmd_angular=angular)


def clamp_ugv_speed(linear: float) -> float:
    return min(max(linear, -UGV_MAX_SPEED), UGV_MAX_SPEED)


def step_ugv(s: UgvState, dt: float) -> UgvState:
    """Exact unicycle integration over dt with the speed clamp applied first."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    v = clamp_ugv_speed(s.cmd_linear)
    w = s.cmd_angular
    if abs(w) < 1e-12:
        nx = s.x + v * math.cos(s.heading) * dt
        ny = s.y + v * math.sin(s.heading) * dt
        nh = s.heading
    else:
        nh = s.heading + w * dt
        nx = s.x + (v / w) * (math.sin(nh) - math.sin(s.heading))
        ny = s.y - (v / w) * (math.cos(nh) - math.cos(s.heading))
    return replace(s, x=nx, y=ny, heading=nh)
