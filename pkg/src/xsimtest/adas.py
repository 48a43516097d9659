"""Pedestrian warning function under test.

The detector watches a rectangular Acute Warning Area (AWA) in front of the
car whose length grows with speed.  It warns when the sensor reports a
pedestrian in or within ``margin`` of the AWA while the reported TTC is
below ``ttc_threshold``.  It never brakes and never changes the scenario.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .kinematics import rect_distance
from .simulator import Observation, SimulationTrace


@dataclass(frozen=True)
class DetectorConfig:
    margin: float = 0.2
    ttc_threshold: float = 4.0
    headway: float = 1.4
    base_length: float = 5.0
    lane_width: float = 3.5
    lateral_offset: float = 0.0

    def __post_init__(self):
        if self.margin < 0:
            raise ValueError("margin must be non-negative")
        if self.ttc_threshold <= 0:
            raise ValueError("ttc_threshold must be positive")
        if self.base_length <= 0 or self.headway < 0 or self.lane_width <= 0:
            raise ValueError("AWA dimensions must be positive")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class AwaSpec:
    """AWA rectangle in bumper coordinates: x ahead of the bumper, y to the left."""

    length: float
    width: float
    lateral_offset: float = 0.0

    @property
    def extent(self) -> tuple[float, float, float, float]:
        half = self.width / 2
        return (0.0, self.length, self.lateral_offset - half, self.lateral_offset + half)

    def distance(self, rel_x, rel_y):
        """Distance from bumper-relative points to the rectangle (0 inside)."""
        return rect_distance(rel_x, rel_y, *self.extent)


@dataclass
class DetectionEvent:
    first_time: float | None
    warnings: np.ndarray

    @property
    def detected(self) -> bool:
        return self.first_time is not None


def compute_awa(speed: float, cfg: DetectorConfig) -> AwaSpec:
    if speed < 0:
        raise ValueError("speed must be non-negative")
    return AwaSpec(
        length=cfg.base_length + cfg.headway * speed,
        width=cfg.lane_width,
        lateral_offset=cfg.lateral_offset,
    )


def detect(obs: Observation, awa: AwaSpec, cfg: DetectorConfig) -> bool:
    if not obs.present:
        return False
    near = float(awa.distance(obs.rel_x, obs.rel_y)) <= cfg.margin
    return near and obs.ttc < cfg.ttc_threshold


def run_detector(trace: SimulationTrace, cfg: DetectorConfig) -> DetectionEvent:
    """Apply :func:`detect` to every sample of ``trace`` (vectorised)."""
    speed = np.hypot(trace.car_vx, trace.car_vy)
    length = cfg.base_length + cfg.headway * speed
    half = cfg.lane_width / 2
    with np.errstate(invalid="ignore"):
        d = rect_distance(
            trace.sensed_x, trace.sensed_y,
            0.0, length, cfg.lateral_offset - half, cfg.lateral_offset + half,
        )
        warnings = trace.sensed & (d <= cfg.margin) & (trace.ttc < cfg.ttc_threshold)
    first = float(trace.t[np.argmax(warnings)]) if warnings.any() else None
    return DetectionEvent(first_time=first, warnings=warnings)
