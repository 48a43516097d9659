"""Fitness functions and single-scenario evaluation.

The three objectives, all minimised:

* ``ff1`` minimum distance between the car footprint and the pedestrian,
* ``ff2`` minimum distance between the AWA and the pedestrian,
* ``ff3`` minimum TTC reported by the sensor (4 s when never reported).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .adas import AwaSpec, DetectorConfig, run_detector
from .kinematics import TTC_CAP, State, rect_distance, ttc
from .scene import SceneConfig, TestInput
from .simulator import (
    BackendConfig,
    LossyChannelConfig,
    SimulationTrace,
    aggregate_mode,
    drop_samples,
    simulate,
)

__all__ = [
    "ScenarioOutcome",
    "State",
    "ttc",
    "distance_to_awa",
    "awa_distances",
    "outcome_from_trace",
    "evaluate",
]


@dataclass(frozen=True)
class ScenarioOutcome:
    ff1: float
    ff2: float
    ff3: float
    collision: bool
    detected: bool
    detection_time: float | None
    termination: str
    backend: str
    input: TestInput
    seed: int | None = None

    @property
    def objectives(self) -> tuple[float, float, float]:
        return (self.ff1, self.ff2, self.ff3)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["input"] = self.input.as_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> ScenarioOutcome:
        d = dict(d)
        d["input"] = TestInput(**d["input"])
        return cls(**d)


def distance_to_awa(ped_xy, awa: AwaSpec, car: State) -> float:
    """Distance from a pedestrian position to the AWA of a car.

    ``car`` is the front-bumper state; the car heads along +x so the AWA is
    the axis-aligned rectangle ahead of it.
    """
    return float(awa.distance(ped_xy[0] - car.x, ped_xy[1] - car.y))


def awa_distances(trace: SimulationTrace, scene: SceneConfig, cfg: DetectorConfig) -> np.ndarray:
    """Per-sample ground-truth pedestrian distance to the (speed-dependent) AWA."""
    speed = np.hypot(trace.car_vx, trace.car_vy)
    half = cfg.lane_width / 2
    return rect_distance(
        trace.ped_x - (trace.car_x + scene.front_offset),
        trace.ped_y - trace.car_y,
        0.0, cfg.base_length + cfg.headway * speed,
        cfg.lateral_offset - half, cfg.lateral_offset + half,
    )


def outcome_from_trace(
    trace: SimulationTrace,
    inp: TestInput,
    scene: SceneConfig,
    detector: DetectorConfig,
    ttc_source: str = "sensor",
    seed: int | None = None,
) -> ScenarioOutcome:
    if len(trace) == 0:
        raise ValueError("cannot score an empty trace")
    event = run_detector(trace, detector)
    if ttc_source == "sensor":
        ttc_col = trace.ttc
    elif ttc_source == "oracle":
        ttc_col = trace.ttc_true
    else:
        raise ValueError(f"unknown TTC source {ttc_source!r}")
    return ScenarioOutcome(
        ff1=float(trace.dist.min()),
        ff2=float(awa_distances(trace, scene, detector).min()),
        ff3=float(min(ttc_col.min(), TTC_CAP)),
        collision=bool(trace.collision.any()),
        detected=event.detected,
        detection_time=event.first_time,
        termination=trace.termination,
        backend=trace.backend,
        input=inp,
        seed=seed,
    )


def evaluate(
    inp: TestInput,
    backend: BackendConfig,
    scene: SceneConfig,
    detector: DetectorConfig,
    channel: LossyChannelConfig | None = None,
    seed: int | None = None,
    ttc_source: str = "sensor",
) -> ScenarioOutcome:
    """Simulate one test input on ``backend`` and score it.

    With a lossy channel the scenario is replayed ``channel.repeats`` times,
    each with independently dropped samples, and the per-repeat outcomes are
    collapsed with :func:`aggregate_mode`.  All loss randomness comes from
    ``seed``.
    """
    trace = simulate(inp, scene, backend)
    if channel is None:
        return outcome_from_trace(trace, inp, scene, detector, ttc_source, seed)
    rng = np.random.default_rng(seed)
    repeats = []
    for _ in range(channel.repeats):
        lossy = drop_samples(trace, channel.loss_probability, rng)
        if len(lossy):
            repeats.append(outcome_from_trace(lossy, inp, scene, detector, ttc_source, seed))
    if not repeats:
        raise ValueError("every repetition lost every sample")
    return aggregate_mode(repeats, channel.precision)
