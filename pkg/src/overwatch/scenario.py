"""Scenario files: everything a deterministic run needs besides the seed.

Scenarios are TOML documents describing the world (robot start poses,
home), the model parameters (vehicle, controller, detector, odometry,
localization, servoing) and the script (timed drive commands and
mission events). Unknown keys are rejected so typos fail loudly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .dynamics import MavParams
from .mission import ServoConfig
from .nmpc import MpcConfig
from .sensing import DetectorConfig, SlamModel

PLANT_DT = 0.01  # s, 100 Hz physics
CONTROL_DT = 0.05  # s, 20 Hz controller/detector
PLANT_SUBSTEPS = round(CONTROL_DT / PLANT_DT)

EVENT_TYPES = ("transfer", "return_home", "set_offset", "displace", "drift", "drive")


class ScenarioError(ValueError):
    """Scenario file could not be parsed or validated."""


@dataclass
class UgvSpec:
    id: str
    start: tuple = (0.0, 0.0)
    heading: float = 0.0
    drive: list = field(default_factory=list)  # [{t, linear, angular}], sorted by t


@dataclass
class VioSpec:
    sigma_xy: float = 0.059
    sigma_z: float = 0.01
    sigma_yaw: float = 0.002
    initial_offset: tuple = (0.0, 0.0, 0.0)
    initial_offset_yaw: float = 0.0


@dataclass
class Scenario:
    name: str
    duration: float
    mav_start: tuple = (0.0, 0.0, 2.0)
    mav_yaw: float = 0.0
    mav_params: MavParams = field(default_factory=MavParams)
    mpc: MpcConfig = None
    servo: ServoConfig = field(default_factory=ServoConfig)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    vio: VioSpec = field(default_factory=VioSpec)
    slam: SlamModel = field(default_factory=SlamModel)
    home: tuple = (0.0, 0.0, 0.0)
    home_tag: bool = False
    ugvs: list = field(default_factory=list)
    events: list = field(default_factory=list)  # [{t, type, ...}], sorted by t
    assertions: dict = field(default_factory=dict)
    interactive: bool = False

    def __post_init__(self):
        if self.duration <= 0:
            raise ScenarioError("duration must be positive")
        if self.mpc is None:
            self.mpc = MpcConfig.for_params(self.mav_params)
        ids = [u.id for u in self.ugvs]
        if len(set(ids)) != len(ids):
            raise ScenarioError("duplicate ugv ids")
        known = set(ids)
        for ev in self.events:
            if ev["type"] not in EVENT_TYPES:
                raise ScenarioError(f"unknown event type: {ev['type']}")
            ref = ev.get("to") or ev.get("ugv")
            if ref is not None and ref not in known:
                raise ScenarioError(f"event references unknown robot: {ref}")
        self.events = sorted(self.events, key=lambda e: e["t"])

    def ugv_ids(self) -> list:
        return [u.id for u in self.ugvs]


def _take(table: dict, key: str, default=None):
    return table.pop(key) if key in table else default


def _no_leftovers(table: dict, where: str):
    if table:
        raise ScenarioError(f"unknown keys in [{where}]: {sorted(table)}")


def _build_detector(tbl: dict) -> DetectorConfig:
    regime = _take(tbl, "regime", "tag")
    kwargs = {}
    for key in ("fov_half_angle_deg",):
        if key in tbl:
            kwargs["fov_half_angle"] = math.radians(tbl.pop(key))
    for key in ("min_height", "max_height", "detect_probability",
                "sigma_translation", "sigma_yaw", "sigma_box_jitter", "attempt_rate"):
        if key in tbl:
            kwargs[key] = tbl.pop(key)
    _no_leftovers(tbl, "detector")
    if regime == "feature":
        return DetectorConfig.feature(**kwargs)
    return DetectorConfig(regime=regime, **kwargs)


def _build_mav_params(tbl: dict) -> MavParams:
    kwargs = {}
    if "att_limit_deg" in tbl:
        kwargs["att_limit"] = math.radians(tbl.pop("att_limit_deg"))
    for key in ("mass", "gravity", "tau_att", "tau_yaw", "thrust_min",
                "thrust_max", "drag"):
        if key in tbl:
            kwargs[key] = tbl.pop(key)
    _no_leftovers(tbl, "mav.params")
    return MavParams(**kwargs)


def _build_mpc(tbl: dict, params: MavParams) -> MpcConfig:
    kwargs = {}
    for key in ("horizon", "dt", "max_iters", "tol"):
        if key in tbl:
            kwargs[key] = tbl.pop(key)
    for key, attr in (("q_diag", "q_state"), ("r_diag", "r_input"), ("p_diag", "p_terminal")):
        if key in tbl:
            kwargs[attr] = np.diag(np.asarray(tbl.pop(key), dtype=float))
    _no_leftovers(tbl, "mpc")
    return MpcConfig.for_params(params, **kwargs)


def _build_servo(tbl: dict) -> ServoConfig:
    kwargs = {}
    for key in ("hover_height", "r_max", "t_offset", "detection_timeout",
                "transit_height", "search_height", "stable_speed_max",
                "stable_att_rate_max", "descend_trigger", "land_height"):
        if key in tbl:
            val = tbl.pop(key)
            kwargs[key] = tuple(val) if key == "t_offset" else val
    _no_leftovers(tbl, "servo")
    return ServoConfig(**kwargs)


def load_scenario(path) -> Scenario:
    """Parse and validate a scenario TOML file."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc
    return scenario_from_dict(doc, default_name=path.stem)


def scenario_from_dict(doc: dict, default_name: str = "scenario") -> Scenario:
    doc = dict(doc)
    name = _take(doc, "name", default_name)
    duration = _take(doc, "duration")
    if duration is None:
        raise ScenarioError("scenario needs a duration")
    interactive = bool(_take(doc, "interactive", False))

    mav_tbl = dict(_take(doc, "mav", {}))
    mav_start = tuple(_take(mav_tbl, "start", (0.0, 0.0, 2.0)))
    mav_yaw = float(_take(mav_tbl, "yaw", 0.0))
    params = _build_mav_params(dict(_take(mav_tbl, "params", {})))
    _no_leftovers(mav_tbl, "mav")

    mpc = _build_mpc(dict(_take(doc, "mpc", {})), params)
    servo = _build_servo(dict(_take(doc, "servo", {})))
    detector = _build_detector(dict(_take(doc, "detector", {})))

    vio_tbl = dict(_take(doc, "vio", {}))
    vio = VioSpec(
        sigma_xy=float(_take(vio_tbl, "sigma_xy", 0.059)),
        sigma_z=float(_take(vio_tbl, "sigma_z", 0.01)),
        sigma_yaw=float(_take(vio_tbl, "sigma_yaw", 0.002)),
        initial_offset=tuple(_take(vio_tbl, "initial_offset", (0.0, 0.0, 0.0))),
        initial_offset_yaw=float(_take(vio_tbl, "initial_offset_yaw", 0.0)),
    )
    _no_leftovers(vio_tbl, "vio")

    slam_tbl = dict(_take(doc, "slam", {}))
    slam = SlamModel(sigma=float(_take(slam_tbl, "sigma", 0.02)),
                     rate=float(_take(slam_tbl, "rate", 1.0 / 3.0)))
    _no_leftovers(slam_tbl, "slam")

    home_tbl = dict(_take(doc, "home", {}))
    home = tuple(_take(home_tbl, "position", (0.0, 0.0, 0.0)))
    home_tag = bool(_take(home_tbl, "tag", False))
    _no_leftovers(home_tbl, "home")

    ugvs = []
    for utbl in _take(doc, "ugvs", []):
        utbl = dict(utbl)
        uid = _take(utbl, "id")
        if uid is None:
            raise ScenarioError("every [[ugvs]] entry needs an id")
        drive = [dict(d) for d in _take(utbl, "drive", [])]
        for d in drive:
            if "t" not in d:
                raise ScenarioError(f"drive command for {uid} needs a time t")
        ugvs.append(
            UgvSpec(
                id=str(uid),
                start=tuple(_take(utbl, "start", (0.0, 0.0))),
                heading=float(_take(utbl, "heading", 0.0)),
                drive=sorted(drive, key=lambda d: d["t"]),
            )
        )
        _no_leftovers(utbl, f"ugvs.{uid}")

    events = [dict(e) for e in _take(doc, "events", [])]
    for ev in events:
        if "t" not in ev or "type" not in ev:
            raise ScenarioError("every event needs t and type")

    assertions = {k: dict(v) for k, v in dict(_take(doc, "assertions", {})).items()}
    _no_leftovers(doc, "scenario")

    return Scenario(
        name=name, duration=float(duration), mav_start=mav_start, mav_yaw=mav_yaw,
        mav_params=params, mpc=mpc, servo=servo, detector=detector, vio=vio,
        slam=slam, home=home, home_tag=home_tag, ugvs=ugvs, events=events,
        assertions=assertions, interactive=interactive,
    )
