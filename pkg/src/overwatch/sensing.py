"""Parametric perception models.

Nothing here touches pixels: detection, odometry drift and ground-robot
localization are simulated at the pose level with configurable noise.
Defaults are fitted so that aggregate closed-loop statistics land in the
experimentally observed ranges; they are not measured sensor parameters.

The downward camera is mounted with its z-axis along the viewing axis
(straight down when the MAV is level); the default extrinsic is a pure
180-degree roll of the body frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .se3 import Pose, compose, invert


def down_camera_extrinsic(offset=(0.0, 0.0, 0.0)) -> Pose:
    """Camera-in-body pose for a rigidly mounted downward-facing camera."""
    return Pose.from_rpy(np.asarray(offset, dtype=float), roll=math.pi)


TAG = "tag"
FEATURE = "feature"


@dataclass(frozen=True)
class DetectorConfig:
    """Envelope and noise for one detection regime.

    The feature regime models box-center pose estimation from matched
    visual features: it inherits the tag regime's geometry but adds
    bounding-box jitter, so its translation scatter is strictly larger.
    """

    regime: str = TAG
    fov_half_angle: float = math.radians(45.0)
    min_height: float = 0.3  # m
    max_height: float = 5.0  # m, greatest validated detection height
    detect_probability: float = 0.8  # per attempt, inside the envelope
    sigma_translation: float = 0.01  # m, per camera axis
    sigma_yaw: float = 0.01  # rad
    sigma_box_jitter: float = 0.03  # m, extra planar scatter (feature regime only)
    attempt_rate: float = 20.0  # Hz, camera frame rate
    extrinsic: Pose = field(default_factory=down_camera_extrinsic)

    def __post_init__(self):
        if self.regime not in (TAG, FEATURE):
            raise ValueError(f"unknown detection regime: {self.regime}")
        if not 0.0 <= self.detect_probability <= 1.0:
            raise ValueError("detect_probability must be in [0, 1]")
        if min(self.sigma_translation, self.sigma_yaw, self.sigma_box_jitter) < 0:
            raise ValueError("noise sigmas must be non-negative")

    @staticmethod
    def feature(**overrides) -> "DetectorConfig":
        defaults = dict(regime=FEATURE, sigma_translation=0.05, sigma_yaw=0.05)
        defaults.update(overrides)
        return DetectorConfig(**defaults)


@dataclass(frozen=True)
class Detection:
    """One detection: the target pose in the camera frame plus provenance."""

    rel_camera: Pose
    regime: str
    time: float


def visible(mav_true: Pose, target_true: Pose, cfg: DetectorConfig) -> bool:
    """Geometric visibility: inside the view cone and the height window."""
    cam_w = compose(mav_true, cfg.extrinsic)
    rel = compose(invert(cam_w), target_true)
    tx, ty, tz = rel.translation
    if tz <= 0.0:  # behind the image plane
        return False
    height = float(mav_true.translation[2] - target_true.translation[2])
    if not (cfg.min_height <= height <= cfg.max_height):
        return False
    return bool(math.hypot(tx, ty) <= tz * math.tan(cfg.fov_half_angle))


def detect(mav_true: Pose, target_true: Pose, cfg: DetectorConfig,
           rng: np.random.Generator, t: float = 0.0) -> Optional[Detection]:
    """One detection attempt against the true geometry.

    Returns None when the target is outside the envelope (never a false
    positive) or the Bernoulli attempt fails; otherwise the true relative
    pose corrupted by the regime's noise.
    """
    if not visible(mav_true, target_true, cfg):
        return None
    if rng.random() >= cfg.detect_probability:
        return None
    cam_w = compose(mav_true, cfg.extrinsic)
    rel = compose(invert(cam_w), target_true)
    noise_t = cfg.sigma_translation * rng.standard_normal(3)
    if cfg.regime == FEATURE:
        # box-center scatter acts in the image plane (camera x/y)
        noise_t[0] += cfg.sigma_box_jitter * rng.standard_normal()
        noise_t[1] += cfg.sigma_box_jitter * rng.standard_normal()
    dyaw = cfg.sigma_yaw * rng.standard_normal()
    noisy = compose(
        Pose(rel.translation + noise_t, rel.rotation),
        Pose.from_rpy(np.zeros(3), yaw=dyaw),
    )
    return Detection(noisy, cfg.regime, t)


@dataclass(frozen=True)
class VioState:
    """Odometry estimate as a drifting world-frame transform over the truth.

    estimate = drift o truth. The drift pose random-walks with per-axis
    increments of sigma * sqrt(dt); with all sigmas zero the estimate
    stays at the truth composed with the initial offset.
    """

    estimate: Pose
    drift: Pose
    sigma_xy: float = 0.059  # m / sqrt(s), fitted
    sigma_z: float = 0.01  # m / sqrt(s)
    sigma_yaw: float = 0.002  # rad / sqrt(s)

    @staticmethod
    def initial(true_pose: Pose, offset: Pose = None, sigma_xy: float = 0.059,
                sigma_z: float = 0.01, sigma_yaw: float = 0.002) -> "VioState":
        offset = offset if offset is not None else Pose.identity()
        return VioState(compose(offset, true_pose), offset, sigma_xy, sigma_z, sigma_yaw)

    def with_estimate(self, new_estimate: Pose, true_pose: Pose) -> "VioState":
        """Overwrite the estimate (world-frame reset); drift re-derived from truth."""
        return replace(self, estimate=new_estimate,
                       drift=compose(new_estimate, invert(true_pose)))


def vio_step(state: VioState, true_motion_increment: Pose, dt: float,
             rng: np.random.Generator) -> VioState:
    """Advance the odometry model by one update of duration dt."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    root = math.sqrt(dt)
    step_t = np.array(
        [
            state.sigma_xy * root * rng.standard_normal(),
            state.sigma_xy * root * rng.standard_normal(),
            state.sigma_z * root * rng.standard_normal(),
        ]
    )
    step_yaw = state.sigma_yaw * root * rng.standard_normal()
    walk = Pose.from_rpy(step_t, yaw=step_yaw)
    drift = compose(walk, state.drift)
    truth = compose(compose(invert(state.drift), state.estimate), true_motion_increment)
    return replace(state, estimate=compose(drift, truth), drift=drift)


@dataclass(frozen=True)
class SlamModel:
    """Bounded-error ground-robot localization (scan-based, memoryless)."""

    sigma: float = 0.02  # m, planar
    rate: float = 1.0 / 3.0  # Hz, full-scan rate

    def __post_init__(self):
        if self.sigma < 0 or self.rate <= 0:
            raise ValueError("sigma must be >= 0 and rate > 0")


def slam_pose(ugv_true: Pose, model: SlamModel, rng: np.random.Generator) -> Pose:
    """Truth plus truncated planar Gaussian error (norm capped at 3 sigma)."""
    if model.sigma == 0.0:
        rng.standard_normal(2)  # keep the stream aligned across configs
        return ugv_true
    while True:
        err = model.sigma * rng.standard_normal(2)
        if math.hypot(err[0], err[1]) <= 3.0 * model.sigma:
            break
    t = ugv_true.translation + np.array([err[0], err[1], 0.0])
    return Pose(t, ugv_true.rotation)
