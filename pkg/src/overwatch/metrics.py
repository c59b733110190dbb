"""Run metrics, computed incrementally from the event stream.

The same accumulator is fed by the live simulation and by the log
reader, so recomputing metrics from a log file reproduces the values
the run reported.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional


@dataclass
class RunMetrics:
    duration: float = 0.0
    transfer_attempts: int = 0
    transfer_successes: int = 0
    arrival_displacements: list = field(default_factory=list)
    arrival_disp_mean: float = 0.0
    arrival_disp_max: float = 0.0
    time_inside_r_max: float = 0.0  # fraction of tracking time on station
    detections_per_second: float = 0.0
    detection_seconds_fraction: float = 0.0  # tracked seconds with >= 1 detection
    recovery_attempts: int = 0
    recovery_successes: int = 0
    landing_offset: Optional[float] = None
    solver_degraded_ticks: int = 0

    def __post_init__(self):
        if self.transfer_successes > self.transfer_attempts:
            raise ValueError("successes cannot exceed attempts")
        for frac in (self.time_inside_r_max, self.detection_seconds_fraction):
            if not 0.0 <= frac <= 1.0:
                raise ValueError("fractions must lie in [0, 1]")

    def to_json(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_json(obj: dict) -> "RunMetrics":
        return RunMetrics(**obj)


class MetricsAccumulator:
    """Folds log events into a RunMetrics; event order must be the log order."""

    def __init__(self, r_max: float, recovery_window: float = 15.0):
        self.r_max = r_max
        self.recovery_window = recovery_window
        self.duration = 0.0
        self.transfer_attempts = 0
        self.arrivals: list = []  # (t, target, displacement)
        self._successes = 0
        self._awaiting_target: Optional[str] = None
        self.tracking_ticks = 0
        self.inside_ticks = 0
        self.detections = 0
        self._bins: dict = {}  # second -> [tracked_visible_ticks, detections]
        self._recoveries: list = []  # [t_displace, deadline, samples(t, err)]
        self.landing_offset: Optional[float] = None
        self.degraded_ticks = 0
        self._ticks_per_second: Optional[int] = None

    # -- event feed ----------------------------------------------------------

    def consume(self, entry: dict) -> None:
        kind = entry.get("type")
        if kind == "snapshot":
            self._on_snapshot(entry)
        elif kind == "event":
            self._on_event(entry)
        elif kind == "detection":
            self.detections += 1
            sec = int(entry["t"])
            self._bins.setdefault(sec, [0, 0])[1] += 1
        elif kind == "command" and entry.get("cmd", {}).get("type") == "displace":
            t = entry["t"]
            for rec in self._recoveries:
                rec["end"] = min(rec["end"], t)
            self._recoveries.append(
                {"t": t, "deadline": t + self.recovery_window, "end": math.inf,
                 "samples": []}
            )

    def _on_snapshot(self, snap: dict) -> None:
        t = snap["t"]
        self.duration = max(self.duration, t)
        if snap.get("degraded"):
            self.degraded_ticks += 1
        phase = snap.get("phase", "")
        r_err = snap.get("r_err")
        if phase.startswith("tracking") and r_err is not None:
            self.tracking_ticks += 1
            if r_err <= self.r_max:
                self.inside_ticks += 1
            if snap.get("vis"):
                self._bins.setdefault(int(t), [0, 0])[0] += 1
        if r_err is not None:
            for rec in self._recoveries:
                if rec["t"] <= t < rec["end"]:
                    rec["samples"].append((t, r_err))

    def _on_event(self, entry: dict) -> None:
        ev = entry.get("event")
        if ev == "transfer_requested":
            self.transfer_attempts += 1
            self._awaiting_target = None
        elif ev == "transfer_arrival":
            self.arrivals.append(
                (entry["t"], entry.get("target"), float(entry["displacement"]))
            )
            self._awaiting_target = entry.get("target")
        elif ev == "acquired":
            if self._awaiting_target is not None and entry.get("target") == self._awaiting_target:
                self._successes += 1
                self._awaiting_target = None
        elif ev == "landed":
            self.landing_offset = entry.get("offset")

    # -- finalization ----------------------------------------------------------

    def _detection_stats(self) -> tuple:
        # one bin per fully-tracked-and-visible second
        if self._ticks_per_second is None:
            self._ticks_per_second = 20
        qualified = [
            counts for counts in self._bins.values()
            if counts[0] >= self._ticks_per_second
        ]
        if not qualified:
            return 0.0, 0.0
        with_det = sum(1 for c in qualified if c[1] >= 1)
        per_sec = sum(c[1] for c in qualified) / len(qualified)
        return per_sec, with_det / len(qualified)

    def _recovery_stats(self) -> tuple:
        attempts = len(self._recoveries)
        successes = 0
        for rec in self._recoveries:
            samples = rec["samples"]
            entered: Optional[float] = None
            ok = False
            # success: stays inside r_max from some time before the deadline on
            for t, err in samples:
                if err <= self.r_max:
                    if entered is None:
                        entered = t
                else:
                    entered = None
            if entered is not None and entered <= rec["deadline"]:
                ok = True
            successes += ok
        return attempts, successes

    def finalize(self) -> RunMetrics:
        disps = [d for (_, _, d) in self.arrivals]
        per_sec, frac = self._detection_stats()
        rec_attempts, rec_successes = self._recovery_stats()
        return RunMetrics(
            duration=self.duration,
            transfer_attempts=self.transfer_attempts,
            transfer_successes=self._successes,
            arrival_displacements=disps,
            arrival_disp_mean=(sum(disps) / len(disps)) if disps else 0.0,
            arrival_disp_max=max(disps) if disps else 0.0,
            time_inside_r_max=(self.inside_ticks / self.tracking_ticks)
            if self.tracking_ticks else 0.0,
            detections_per_second=per_sec,
            detection_seconds_fraction=frac,
            recovery_attempts=rec_attempts,
            recovery_successes=rec_successes,
            landing_offset=self.landing_offset,
            solver_degraded_ticks=self.degraded_ticks,
        )

    def snapshot_metrics(self) -> dict:
        """Cheap partial view for live status displays."""
        disps = [d for (_, _, d) in self.arrivals]
        return {
            "transfer_attempts": self.transfer_attempts,
            "transfer_successes": self._successes,
            "arrival_disp_mean": (sum(disps) / len(disps)) if disps else 0.0,
            "detections": self.detections,
        }


def check_assertions(metrics: RunMetrics, assertions: dict) -> list:
    """Evaluate scenario-embedded bounds; returns failure strings (empty = pass)."""
    failures = []
    values = metrics.to_json()
    for key, bounds in assertions.items():
        if key not in values:
            failures.append(f"unknown metrics field in assertion: {key}")
            continue
        val = values[key]
        if val is None:
            failures.append(f"{key} is unset")
            continue
        if "min" in bounds and val < bounds["min"]:
            failures.append(f"{key} = {val} below minimum {bounds['min']}")
        if "max" in bounds and val > bounds["max"]:
            failures.append(f"{key} = {val} above maximum {bounds['max']}")
    return failures
