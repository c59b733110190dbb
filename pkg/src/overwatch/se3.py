"""SE(3) pose algebra and frame conventions.

Frames
------
    W : shared world frame, z-up. All robots start aligned to it.
    M : MAV body frame, x-forward, z-up when level.
    C : camera frame, rigidly mounted on M; z points along the viewing
        axis, i.e. straight down when the MAV is level.
    U : UGV body frame, x-forward, planar.

A ``Pose`` stores the transform of a child frame in a parent frame:
``T_child_in_parent`` maps child coordinates into parent coordinates via
``p_parent = R q + t``.

Relative-pose convention
------------------------
A detection is the UGV pose expressed relative to the camera
(``rel_camera``, the UGV in C coordinates). Chaining it with the MAV
world pose and the fixed camera extrinsic therefore yields the UGV pose
in world coordinates:

    ugv_in_world = mav_in_world * cam_in_mav * rel_camera

The world-frame reset consumes the MAV-relative factor of that chain
(``cam_in_mav * rel_camera``, the UGV relative to the MAV body): the MAV
world pose is overwritten so that composing it with the relative pose
lands exactly on the UGV's own localization estimate. This is the one
reading under which both the transform chain and the reset are mutually
consistent; it is fixed here once and used everywhere.

Rotations are stored as unit quaternions, scalar first ``[w, x, y, z]``.
Yaw extraction uses the ZYX (yaw-pitch-roll) Euler convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

_QUAT_EPS = 1e-12


def _quat_normalize(q: np.ndarray) -> np.ndarray:
    n = math.sqrt(float(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]))
    if n < _QUAT_EPS:
        raise ValueError("degenerate quaternion")
    return q / n


def _quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def _quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    # v' = v + 2 w (u x v) + 2 u x (u x v), u = vector part; crosses unrolled
    w, ux, uy, uz = q
    vx, vy, vz = v
    tx = 2.0 * (uy * vz - uz * vy)
    ty = 2.0 * (uz * vx - ux * vz)
    tz = 2.0 * (ux * vy - uy * vx)
    return np.array(
        [
            vx + w * tx + uy * tz - uz * ty,
            vy + w * ty + uz * tx - ux * tz,
            vz + w * tz + ux * ty - uy * tx,
        ]
    )


def _quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


@dataclass(frozen=True)
class Pose:
    """Rigid transform: translation in meters plus unit quaternion.

    Immutable; every constructor and operation re-normalizes the
    quaternion, so the unit-norm invariant holds to machine precision.
    """

    translation: np.ndarray
    rotation: np.ndarray  # quaternion [w, x, y, z]

    def __post_init__(self):
        t = np.asarray(self.translation, dtype=float).reshape(3).copy()
        q = _quat_normalize(np.asarray(self.rotation, dtype=float).reshape(4).copy())
        t.flags.writeable = False
        q.flags.writeable = False
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "rotation", q)

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.zeros(3), np.array([1.0, 0.0, 0.0, 0.0]))

    @staticmethod
    def from_rpy(translation, roll: float = 0.0, pitch: float = 0.0, yaw: float = 0.0) -> "Pose":
        """Build a pose from translation and ZYX Euler angles."""
        cr, sr = math.cos(roll / 2), math.sin(roll / 2)
        cp, sp = math.cos(pitch / 2), math.sin(pitch / 2)
        cy, sy = math.cos(yaw / 2), math.sin(yaw / 2)
        q = np.array(
            [
                cy * cp * cr + sy * sp * sr,
                cy * cp * sr - sy * sp * cr,
                cy * sp * cr + sy * cp * sr,
                sy * cp * cr - cy * sp * sr,
            ]
        )
        return Pose(np.asarray(translation, dtype=float), q)

    @staticmethod
    def from_xy_yaw(x: float, y: float, yaw: float, z: float = 0.0) -> "Pose":
        return Pose.from_rpy(np.array([x, y, z]), yaw=yaw)

    @staticmethod
    def from_matrix(m: np.ndarray) -> "Pose":
        """Build from a 4x4 homogeneous matrix (rotation part must be orthonormal)."""
        m = np.asarray(m, dtype=float)
        r = m[:3, :3]
        w = math.sqrt(max(0.0, 1.0 + r[0, 0] + r[1, 1] + r[2, 2])) / 2.0
        if w > 1e-6:
            q = np.array(
                [
                    w,
                    (r[2, 1] - r[1, 2]) / (4 * w),
                    (r[0, 2] - r[2, 0]) / (4 * w),
                    (r[1, 0] - r[0, 1]) / (4 * w),
                ]
            )
        else:
            # w near zero: recover the dominant vector component first
            d = np.diagonal(r)
            i = int(np.argmax(d))
            j, k = (i + 1) % 3, (i + 2) % 3
            s = math.sqrt(max(0.0, d[i] - d[j] - d[k] + 1.0)) / 2.0
            q = np.zeros(4)
            q[1 + i] = s
            q[0] = (r[k, j] - r[j, k]) / (4 * s)
            q[1 + j] = (r[j, i] + r[i, j]) / (4 * s)
            q[1 + k] = (r[k, i] + r[i, k]) / (4 * s)
        return Pose(m[:3, 3], q)

    def matrix(self) -> np.ndarray:
        """4x4 homogeneous matrix."""
        m = np.eye(4)
        m[:3, :3] = _quat_to_matrix(self.rotation)
        m[:3, 3] = self.translation
        return m

    def rotation_matrix(self) -> np.ndarray:
        return _quat_to_matrix(self.rotation)

    def apply(self, point) -> np.ndarray:
        """Map a point from the child frame into the parent frame."""
        return _quat_rotate(self.rotation, np.asarray(point, dtype=float)) + self.translation

    def to_json(self) -> dict:
        """Wire/log form: {t: [x,y,z], q: [w,x,y,z]}, quaternion scalar-first."""
        return {"t": [float(v) for v in self.translation], "q": [float(v) for v in self.rotation]}

    @staticmethod
    def from_json(obj: dict) -> "Pose":
        return Pose(np.asarray(obj["t"], dtype=float), np.asarray(obj["q"], dtype=float))


def compose(a: Pose, b: Pose) -> Pose:
    """Rigid transform "first b, then a": (a * b).apply(p) == a.apply(b.apply(p))."""
    t = _quat_rotate(a.rotation, b.translation) + a.translation
    q = _quat_multiply(a.rotation, b.rotation)
    return Pose(t, q)


def invert(p: Pose) -> Pose:
    q_inv = np.array([p.rotation[0], -p.rotation[1], -p.rotation[2], -p.rotation[3]])
    t_inv = -_quat_rotate(q_inv, p.translation)
    return Pose(t_inv, q_inv)


def relative_in_world(t_m_w: Pose, t_c_m: Pose, rel_camera: Pose) -> Pose:
    """Chain a camera-frame detection into world coordinates.

    Args:
        t_m_w: MAV pose in the world (odometry estimate).
        t_c_m: fixed camera-in-body extrinsic.
        rel_camera: detected UGV pose in the camera frame.

    Returns:
        The UGV pose in world coordinates, ``t_m_w * t_c_m * rel_camera``.
    """
    return compose(t_m_w, compose(t_c_m, rel_camera))


def relative_to_body(t_m_w: Pose, ugv_in_world: Pose) -> Pose:
    """MAV-relative factor of the detection chain: the UGV in MAV body coordinates.

    This is the quantity consumed by `reset_mav_world`; it is independent of
    the (drifting) world estimate used to form `ugv_in_world`.
    """
    return compose(invert(t_m_w), ugv_in_world)


def reset_mav_world(t_u_w: Pose, rel_world: Pose) -> Pose:
    """World-frame reset applied on servoing transition events.

    Overwrites the MAV world pose with ``t_u_w * rel_world^-1`` so that the
    detection-derived relative pose and the UGV's own localization estimate
    become mutually consistent: composing the result with ``rel_world``
    recovers ``t_u_w`` exactly.

    Args:
        t_u_w: the UGV's world estimate from its onboard localization.
        rel_world: the UGV pose relative to the MAV (extrinsic * detection).
    """
    return compose(t_u_w, invert(rel_world))


def relative_between_ugvs(t_ui_w: Pose, t_uj_w: Pose) -> Pose:
    """Pose of UGV j expressed in UGV i's body frame: ``t_ui_w^-1 * t_uj_w``."""
    return compose(invert(t_ui_w), t_uj_w)


def yaw_of(p: Pose) -> float:
    """Z-axis heading under the ZYX convention, in (-pi, pi].

    At |pitch| = 90 deg this degenerates to the atan2 of the residual
    convention terms; such poses do not occur in stable servoing.
    """
    w, x, y, z = p.rotation
    yaw = math.atan2(2.0 * (w * z + x * y), 1.0 - 2.0 * (y * y + z * z))
    if yaw <= -math.pi:
        yaw += 2.0 * math.pi
    return yaw


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    a = (a + math.pi) % (2.0 * math.pi) - math.pi
    if a <= -math.pi:
        a += 2.0 * math.pi
    return a


def pose_error(a: Pose, b: Pose) -> tuple[float, float]:
    """(translation norm, rotation angle) of the relative transform a^-1 b."""
    d = compose(invert(a), b)
    w = min(1.0, abs(float(d.rotation[0])))
    return float(np.linalg.norm(d.translation)), 2.0 * math.acos(w)


@dataclass(frozen=True)
class FrameId:
    """Identifier of one of the simulator's frames.

    `kind` is one of "world", "mav", "camera", "ugv"; `index` names the
    robot for the "ugv" kind and must be a registered id when used.
    """

    kind: str
    index: Optional[str] = None

    def __post_init__(self):
        if self.kind not in ("world", "mav", "camera", "ugv"):
            raise ValueError(f"unknown frame kind: {self.kind}")
        if (self.kind == "ugv") != (self.index is not None):
            raise ValueError("ugv frames carry an index, others do not")

    @staticmethod
    def ugv(index: str) -> "FrameId":
        return FrameId("ugv", index)

    def __str__(self) -> str:
        return self.kind if self.index is None else f"{self.kind}:{self.index}"


WORLD = FrameId("world")
MAV = FrameId("mav")
CAMERA = FrameId("camera")


@dataclass(frozen=True)
class StampedRelative:
    """A relative pose sample on a (parent, child) stream at simulation time `time`."""

    parent: FrameId
    child: FrameId
    pose: Pose
    time: float

    def __post_init__(self):
        if self.time < 0.0:
            raise ValueError("stamp must be non-negative")


@dataclass
class RelativeStream:
    """Append-only stream of stamped relatives; stamps must not decrease."""

    parent: FrameId
    child: FrameId
    samples: list = field(default_factory=list)

    def append(self, pose: Pose, time: float) -> StampedRelative:
        if self.samples and time < self.samples[-1].time:
            raise ValueError(
                f"stamp regression on {self.parent}->{self.child}: "
                f"{time} < {self.samples[-1].time}"
            )
        s = StampedRelative(self.parent, self.child, pose, time)
        self.samples.append(s)
        return s

    def latest(self) -> Optional[StampedRelative]:
        return self.samples[-1] if self.samples else None
