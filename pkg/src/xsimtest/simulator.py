"""Two deterministic kinematic backends, a sensor model and a lossy output channel.

The backends share the scene and the stop rules but differ in their
internals, the way two commercial simulators would:

* ``alpha``: 10 ms forward Euler, pedestrian walks at constant speed, an
  80 m / 40 degree ideal sensor, canonical frame.
* ``beta``: 5 ms semi-implicit Euler, pedestrian speed modulated by +-10 %
  at 2 Hz, a 60 m / 50 degree sensor with one sample of latency and 0.1 m
  position quantization, and a shifted origin with clockwise-from-+y
  headings and km/h speeds.

Both publish samples every 40 ms.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field, fields, replace
from typing import NamedTuple

import numpy as np

from .kinematics import TTC_CAP, rect_distance, segment_distance, ttc_array
from .scene import CANONICAL, FrameSpec, SceneConfig, TestInput, translate

TERMINATIONS = ("road-end", "crossed", "passed")


class ConfigurationError(ValueError):
    """Raised for inconsistent simulator or channel settings."""


@dataclass(frozen=True)
class BackendConfig:
    name: str
    step: float
    sample_period: float = 0.04
    sensor_range: float = 80.0
    fov_deg: float = 40.0
    latency: int = 0
    quantization: float = 0.0
    gait_amplitude: float = 0.0
    gait_frequency: float = 0.0
    integrator: str = "euler"
    frame: FrameSpec = field(default_factory=FrameSpec)

    @property
    def steps_per_sample(self) -> int:
        return int(round(self.sample_period / self.step))

    def validate(self) -> None:
        if self.step <= 0 or self.sample_period <= 0:
            raise ConfigurationError("step and sample period must be positive")
        if self.step > self.sample_period + 1e-12:
            raise ConfigurationError(
                f"internal step {self.step} exceeds sample period {self.sample_period}"
            )
        ratio = self.sample_period / self.step
        if abs(ratio - round(ratio)) > 1e-9:
            raise ConfigurationError(
                f"sample period {self.sample_period} is not a multiple of step {self.step}"
            )
        if self.integrator not in ("euler", "semi-implicit"):
            raise ConfigurationError(f"unknown integrator {self.integrator!r}")
        if self.latency < 0 or self.quantization < 0:
            raise ConfigurationError("latency and quantization must be non-negative")
        if self.sensor_range <= 0 or not 0 < self.fov_deg <= 360:
            raise ConfigurationError("sensor range and field of view must be positive")

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["frame"] = self.frame.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> BackendConfig:
        d = dict(d)
        if "frame" in d:
            d["frame"] = FrameSpec.from_dict(d["frame"])
        return cls(**d)


ALPHA = BackendConfig(
    name="alpha",
    step=0.01,
    sensor_range=80.0,
    fov_deg=40.0,
    integrator="euler",
)

BETA = BackendConfig(
    name="beta",
    step=0.005,
    sensor_range=60.0,
    fov_deg=50.0,
    latency=1,
    quantization=0.1,
    gait_amplitude=0.1,
    gait_frequency=2.0,
    integrator="semi-implicit",
    frame=FrameSpec(origin=(250.0, -40.0), zero_heading=90.0, sense=-1, speed_unit="km/h"),
)

BACKENDS = {"alpha": ALPHA, "beta": BETA}


def get_backend(name: str) -> BackendConfig:
    try:
        return BACKENDS[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown backend {name!r}; valid backends: {', '.join(sorted(BACKENDS))}"
        ) from None


@dataclass(frozen=True)
class LossyChannelConfig:
    loss_probability: float = 0.2
    repeats: int = 20
    precision: float = 0.01

    def __post_init__(self):
        if not 0.0 <= self.loss_probability < 1.0:
            raise ConfigurationError("loss probability must lie in [0, 1)")
        if self.repeats < 1:
            raise ConfigurationError("repeat count must be at least 1")
        if self.precision <= 0:
            raise ConfigurationError("mode precision must be positive")


@dataclass(eq=False)
class SimulationTrace:
    """Fixed-rate samples in the canonical frame.

    Sensor columns hold what the car's sensor reports at each sample (after
    latency); ``sensed_x``/``sensed_y`` are relative to the front bumper and
    NaN when nothing is reported.  ``ttc`` is the reported TTC (capped) and
    ``ttc_true`` the ground-truth TTC from the same instant.
    """

    t: np.ndarray
    car_x: np.ndarray
    car_y: np.ndarray
    car_vx: np.ndarray
    car_vy: np.ndarray
    ped_x: np.ndarray
    ped_y: np.ndarray
    ped_vx: np.ndarray
    ped_vy: np.ndarray
    dist: np.ndarray
    collision: np.ndarray
    sensed: np.ndarray
    sensed_x: np.ndarray
    sensed_y: np.ndarray
    ttc: np.ndarray
    ttc_true: np.ndarray
    termination: str
    backend: str
    sample_period: float

    ARRAYS = (
        "t", "car_x", "car_y", "car_vx", "car_vy", "ped_x", "ped_y", "ped_vx", "ped_vy",
        "dist", "collision", "sensed", "sensed_x", "sensed_y", "ttc", "ttc_true",
    )

    def __len__(self) -> int:
        return len(self.t)

    def subset(self, keep: np.ndarray) -> SimulationTrace:
        return replace(self, **{name: getattr(self, name)[keep] for name in self.ARRAYS})

    def equals(self, other: SimulationTrace) -> bool:
        """Bit-for-bit equality (NaNs compare equal)."""
        if (self.termination, self.backend, self.sample_period) != (
            other.termination, other.backend, other.sample_period
        ):
            return False
        return all(
            np.array_equal(getattr(self, n), getattr(other, n), equal_nan=n in ("sensed_x", "sensed_y"))
            for n in self.ARRAYS
        )


class Observation(NamedTuple):
    present: bool
    rel_x: float
    rel_y: float
    ttc: float


def _quantize(v, q: float):
    if q <= 0:
        return v
    return np.round(np.asarray(v) / q) * q


def _visible(rel_x, rel_y, cfg: BackendConfig):
    rng = np.hypot(rel_x, rel_y)
    bearing = np.degrees(np.arctan2(rel_y, rel_x))
    return (rng <= cfg.sensor_range) & (np.abs(bearing) <= cfg.fov_deg / 2)


def sensor_frame(trace: SimulationTrace, index: int, cfg: BackendConfig, scene: SceneConfig) -> Observation:
    """What the sensor reports at sample ``index``.

    The report describes the world ``cfg.latency`` samples earlier; the
    pedestrian is reported only if it lies within range and inside the field
    of view centred on the car heading.  Reported positions are relative to
    the front bumper and rounded to the backend's quantization step.
    """
    src = index - cfg.latency
    if src < 0:
        return Observation(False, float("nan"), float("nan"), TTC_CAP)
    fx = trace.car_x[src] + scene.front_offset
    fy = trace.car_y[src]
    rx = trace.ped_x[src] - fx
    ry = trace.ped_y[src] - fy
    if not _visible(rx, ry, cfg):
        return Observation(False, float("nan"), float("nan"), TTC_CAP)
    t = float(
        ttc_array(rx, ry, trace.ped_vx[src] - trace.car_vx[src],
                  trace.ped_vy[src] - trace.car_vy[src], scene.ttc_radius)
    )
    return Observation(True, float(_quantize(rx, cfg.quantization)),
                       float(_quantize(ry, cfg.quantization)), t)


def _pedestrian_speed(t: np.ndarray, v0p: float, cfg: BackendConfig) -> np.ndarray:
    if cfg.gait_amplitude == 0.0:
        return np.full_like(t, v0p)
    return v0p * (1.0 + cfg.gait_amplitude * np.sin(2.0 * np.pi * cfg.gait_frequency * t))


def simulate(inp: TestInput, scene: SceneConfig, cfg: BackendConfig) -> SimulationTrace:
    """Run one scenario to its first stop condition.

    ``inp`` is expressed in the backend's native frame; the returned trace is
    in the canonical frame.  The car keeps its initial speed throughout
    (the system under test only warns, it never brakes).
    """
    cfg.validate()
    c = translate(inp, cfg.frame, CANONICAL)
    m = cfg.steps_per_sample
    if c.v0c <= 0:
        raise ConfigurationError("car speed must be positive")

    # enough samples for the car to reach the end of the road
    n_out = int(np.ceil(scene.road_length / (c.v0c * cfg.sample_period) + 1e-9)) + 2
    n_int = (n_out - 1) * m
    t_int = np.arange(n_int + 1) * cfg.step

    speed = _pedestrian_speed(t_int, c.v0p, cfg)
    travelled = np.empty_like(t_int)
    travelled[0] = 0.0
    if cfg.integrator == "euler":
        travelled[1:] = np.cumsum(speed[:-1]) * cfg.step
    else:
        travelled[1:] = np.cumsum(speed[1:]) * cfg.step

    theta = np.radians(c.theta_p)
    ux, uy = np.cos(theta), np.sin(theta)

    k = np.arange(n_out)
    t = k * cfg.sample_period
    car_x = scene.x0c + c.v0c * t
    car_y = np.full(n_out, scene.y0c)
    ped_x = c.x0p + ux * travelled[k * m]
    ped_y = c.y0p + uy * travelled[k * m]
    ped_speed = _pedestrian_speed(t, c.v0p, cfg)

    road_end = car_x - scene.x0c >= scene.road_length - 1e-9
    crossed = ped_y > scene.far_edge
    passed = car_x + scene.rear_offset > ped_x + scene.ped_radius
    stop = road_end | crossed | passed
    last = int(np.argmax(stop))
    if road_end[last]:
        reason = "road-end"
    elif crossed[last]:
        reason = "crossed"
    else:
        reason = "passed"
    n = last + 1

    t, car_x, car_y, ped_x, ped_y, ped_speed = (a[:n] for a in (t, car_x, car_y, ped_x, ped_y, ped_speed))
    car_vx = np.full(n, c.v0c)
    car_vy = np.zeros(n)
    ped_vx = ped_speed * ux
    ped_vy = ped_speed * uy

    half_w = scene.car_width / 2
    rear = car_x + scene.rear_offset
    front = car_x + scene.front_offset
    # distance to the car's centre line; any contact with the footprint
    # keeps this within ped_radius + half the car width
    dist = segment_distance(ped_x, ped_y, rear, front, car_y)
    collision = rect_distance(ped_x, ped_y, rear, front, car_y - half_w, car_y + half_w) <= scene.ped_radius

    rel_x = ped_x - (car_x + scene.front_offset)
    rel_y = ped_y - car_y
    ttc_true = ttc_array(rel_x, rel_y, ped_vx - car_vx, ped_vy - car_vy, scene.ttc_radius)
    visible = _visible(rel_x, rel_y, cfg)

    lag = cfg.latency
    sensed = np.zeros(n, dtype=bool)
    sensed_x = np.full(n, np.nan)
    sensed_y = np.full(n, np.nan)
    ttc = np.full(n, TTC_CAP)
    if lag < n:
        src = slice(0, n - lag)
        dst = slice(lag, n)
        sensed[dst] = visible[src]
        sensed_x[dst] = np.where(visible[src], _quantize(rel_x[src], cfg.quantization), np.nan)
        sensed_y[dst] = np.where(visible[src], _quantize(rel_y[src], cfg.quantization), np.nan)
        ttc[dst] = np.where(visible[src], ttc_true[src], TTC_CAP)

    return SimulationTrace(
        t=t, car_x=car_x, car_y=car_y, car_vx=car_vx, car_vy=car_vy,
        ped_x=ped_x, ped_y=ped_y, ped_vx=ped_vx, ped_vy=ped_vy,
        dist=dist, collision=collision,
        sensed=sensed, sensed_x=sensed_x, sensed_y=sensed_y,
        ttc=ttc, ttc_true=ttc_true,
        termination=reason, backend=cfg.name, sample_period=cfg.sample_period,
    )


def drop_samples(trace: SimulationTrace, loss_probability: float, rng: np.random.Generator) -> SimulationTrace:
    """Drop each sample independently with ``loss_probability``."""
    if loss_probability <= 0.0:
        return trace
    keep = rng.random(len(trace)) >= loss_probability
    return trace.subset(keep)


def simulate_with_loss(
    inp: TestInput,
    scene: SceneConfig,
    cfg: BackendConfig,
    channel: LossyChannelConfig,
    rng: np.random.Generator,
) -> SimulationTrace:
    return drop_samples(simulate(inp, scene, cfg), channel.loss_probability, rng)


def _mode(values, precision: float) -> float:
    grid = [round(round(v / precision) * precision, 12) for v in values]
    counts = Counter(grid)
    best = max(counts.values())
    return min(v for v, c in counts.items() if c == best)


def _majority(flags, tie: bool) -> bool:
    yes = sum(bool(f) for f in flags)
    no = len(flags) - yes
    if yes == no:
        return tie
    return yes > no


def aggregate_mode(outcomes, precision: float = 0.01):
    """Collapse repeated lossy evaluations into one outcome.

    Each fitness value is snapped to the ``precision`` grid and the most
    frequent value wins (ties go to the smaller value).  Flags use a majority
    vote with ties resolved toward the safety-relevant answer: collision and
    not detected.
    """
    outcomes = list(outcomes)
    if not outcomes:
        raise ValueError("cannot aggregate an empty list of outcomes")
    if len(outcomes) == 1:
        return outcomes[0]
    detected = _majority([o.detected for o in outcomes], tie=False)
    times = [o.detection_time for o in outcomes if o.detection_time is not None]
    detection_time = _mode(times, 1e-6) if detected and times else None
    termination = Counter(o.termination for o in outcomes).most_common(1)[0][0]
    return replace(
        outcomes[0],
        ff1=_mode([o.ff1 for o in outcomes], precision),
        ff2=_mode([o.ff2 for o in outcomes], precision),
        ff3=_mode([o.ff3 for o in outcomes], precision),
        collision=_majority([o.collision for o in outcomes], tie=True),
        detected=detected,
        detection_time=detection_time,
        termination=termination,
    )
