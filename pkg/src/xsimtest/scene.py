"""Test-input space, the fixed straight-road scene, and frame translation.

Everything in this module works in the *canonical* frame unless a
:class:`FrameSpec` says otherwise: the ego car starts at ``(x0c, y0c)`` and
drives along +x, the pedestrian starts on the right-hand side (negative
relative y) and headings are measured in degrees counterclockwise from +x.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

GENES = ("v0c", "x0p", "y0p", "theta_p", "v0p")

KMH_PER_MS = 3.6


@dataclass(frozen=True)
class TestInput:
    """One scenario: car speed, pedestrian start position, heading and speed."""

    __test__ = False  # keep pytest from collecting this as a test class

    v0c: float
    x0p: float
    y0p: float
    theta_p: float
    v0p: float

    def as_array(self) -> np.ndarray:
        return np.array([self.v0c, self.x0p, self.y0p, self.theta_p, self.v0p], dtype=float)

    @classmethod
    def from_array(cls, values) -> TestInput:
        v = [float(x) for x in values]
        if len(v) != len(GENES):
            raise ValueError(f"expected {len(GENES)} genes, got {len(v)}")
        return cls(*v)

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in GENES}


@dataclass(frozen=True)
class InputSpace:
    """Closed per-gene ranges.

    Pedestrian position bounds are offsets from the car origin ``(x0c, y0c)``;
    :meth:`bounds` resolves them to absolute coordinates.
    """

    v0c: tuple[float, float] = (1.0, 25.0)
    x0p: tuple[float, float] = (20.0, 85.0)
    y0p: tuple[float, float] = (-15.0, -2.0)
    theta_p: tuple[float, float] = (40.0, 160.0)
    v0p: tuple[float, float] = (1.0, 5.0)
    x0c: float = 0.0
    y0c: float = 0.0

    def __post_init__(self):
        for name in GENES:
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"range for {name} has lower {lo} > upper {hi}")

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Absolute lower and upper bounds, in gene order."""
        lower = np.array([getattr(self, g)[0] for g in GENES], dtype=float)
        upper = np.array([getattr(self, g)[1] for g in GENES], dtype=float)
        shift = np.array([0.0, self.x0c, self.y0c, 0.0, 0.0])
        return lower + shift, upper + shift

    def widths(self) -> np.ndarray:
        lower, upper = self.bounds()
        return upper - lower

    def contains(self, inp: TestInput, tol: float = 0.0) -> bool:
        lower, upper = self.bounds()
        x = inp.as_array()
        return bool(np.all(x >= lower - tol) and np.all(x <= upper + tol))


@dataclass(frozen=True)
class SceneConfig:
    """The minimalistic scene: one straight road, one car, one pedestrian.

    The car footprint is a ``car_length`` x ``car_width`` rectangle whose
    centre sits ``car_center_offset`` metres ahead of the car reference
    point, so with the defaults the reference point is the rear bumper and
    the front bumper is 4 m ahead of it.
    """

    x0c: float = 0.0
    y0c: float = 0.0
    road_length: float = 100.0
    lane_width: float = 3.5
    car_length: float = 4.0
    car_width: float = 1.8
    car_center_offset: float = 2.0
    ped_radius: float = 0.3

    def __post_init__(self):
        if self.road_length <= 0:
            raise ValueError("road_length must be positive")
        if self.car_length <= 0 or self.car_width <= 0:
            raise ValueError("car footprint dimensions must be positive")
        if self.lane_width <= 0:
            raise ValueError("lane_width must be positive")
        if self.ped_radius < 0:
            raise ValueError("ped_radius must be non-negative")

    @property
    def front_offset(self) -> float:
        """Distance from the car reference point to the front bumper."""
        return self.car_center_offset + self.car_length / 2

    @property
    def rear_offset(self) -> float:
        return self.car_center_offset - self.car_length / 2

    @property
    def far_edge(self) -> float:
        """y-coordinate a pedestrian must pass to have crossed the road."""
        return self.y0c + self.lane_width / 2

    @property
    def ttc_radius(self) -> float:
        """Disc radius standing in for the front bumper in TTC computations."""
        return self.ped_radius + self.car_width / 2

    def input_space(self, **ranges) -> InputSpace:
        return InputSpace(x0c=self.x0c, y0c=self.y0c, **ranges)


@dataclass(frozen=True)
class FrameSpec:
    """A simulator's native coordinate and unit conventions.

    A canonical point ``p`` has native coordinates ``p + origin``.  Native
    headings are ``sense * (theta - zero_heading)`` wrapped to [0, 360), where
    ``zero_heading`` is the canonical direction of the native zero and
    ``sense`` is +1 for counterclockwise, -1 for clockwise.
    """

    origin: tuple[float, float] = (0.0, 0.0)
    zero_heading: float = 0.0
    sense: int = 1
    speed_unit: str = "m/s"

    def __post_init__(self):
        if self.sense not in (1, -1):
            raise ValueError("sense must be +1 (counterclockwise) or -1 (clockwise)")
        if self.speed_unit not in ("m/s", "km/h"):
            raise ValueError(f"unknown speed unit {self.speed_unit!r}")

    @property
    def speed_factor(self) -> float:
        return KMH_PER_MS if self.speed_unit == "km/h" else 1.0

    def to_dict(self) -> dict:
        return {
            "origin": list(self.origin),
            "zero_heading": self.zero_heading,
            "sense": self.sense,
            "speed_unit": self.speed_unit,
        }

    @classmethod
    def from_dict(cls, d: dict) -> FrameSpec:
        return cls(
            origin=tuple(float(v) for v in d["origin"]),
            zero_heading=float(d["zero_heading"]),
            sense=int(d["sense"]),
            speed_unit=str(d["speed_unit"]),
        )


CANONICAL = FrameSpec()


def _wrap_degrees(a: float) -> float:
    a = a % 360.0
    return 0.0 if a == 360.0 else a


def heading_to_frame(theta: float, frame: FrameSpec) -> float:
    return _wrap_degrees(frame.sense * (theta - frame.zero_heading))


def heading_from_frame(theta: float, frame: FrameSpec) -> float:
    return _wrap_degrees(frame.zero_heading + frame.sense * theta)


def translate(inp: TestInput, src: FrameSpec, dst: FrameSpec) -> TestInput:
    """Re-express a test input from one simulator frame in another."""
    if src == dst:
        return inp
    dx = dst.origin[0] - src.origin[0]
    dy = dst.origin[1] - src.origin[1]
    speed = dst.speed_factor / src.speed_factor
    theta = heading_to_frame(heading_from_frame(inp.theta_p, src), dst)
    return TestInput(
        v0c=inp.v0c * speed,
        x0p=inp.x0p + dx,
        y0p=inp.y0p + dy,
        theta_p=theta,
        v0p=inp.v0p * speed,
    )


def sample_uniform(space: InputSpace, rng: np.random.Generator) -> TestInput:
    lower, upper = space.bounds()
    return TestInput.from_array(rng.uniform(lower, upper))


def clamp(inp: TestInput, space: InputSpace) -> TestInput:
    lower, upper = space.bounds()
    return TestInput.from_array(np.clip(inp.as_array(), lower, upper))


def scene_from_dict(d: dict) -> SceneConfig:
    names = {f.name for f in fields(SceneConfig)}
    return SceneConfig(**{k: float(v) for k, v in d.items() if k in names})


def scene_to_dict(scene: SceneConfig) -> dict:
    return {f.name: getattr(scene, f.name) for f in fields(scene)}
