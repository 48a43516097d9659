"""Closed-form constant-velocity geometry shared by the simulator and fitness code."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

TTC_CAP = 4.0


class State(NamedTuple):
    x: float
    y: float
    vx: float
    vy: float


def ttc_array(dx, dy, ux, uy, radius: float, cap: float = TTC_CAP) -> np.ndarray:
    """Vectorised time to contact.

    ``(dx, dy)`` is the pedestrian position relative to the car point and
    ``(ux, uy)`` the relative velocity.  Returns the smaller non-negative root
    of ``|d + u t| = radius``; already-touching pairs give 0 and pairs that
    never touch (or would only touch after ``cap``) give ``cap``.
    """
    dx, dy, ux, uy = (np.asarray(v, dtype=float) for v in (dx, dy, ux, uy))
    a = ux * ux + uy * uy
    b = 2.0 * (dx * ux + dy * uy)
    c = dx * dx + dy * dy - radius * radius
    disc = b * b - 4.0 * a * c
    out = np.full(np.broadcast(dx, dy, ux, uy).shape, cap, dtype=float)

    inside = c <= 0.0
    approaching = (~inside) & (a > 0.0) & (b < 0.0) & (disc >= 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        # numerically stable smaller root: 2c / (-b + sqrt(disc)) with b < 0
        root = 2.0 * c / (-b + np.sqrt(np.where(approaching, disc, 0.0)))
    out = np.where(approaching, np.minimum(root, cap), out)
    out = np.where(inside, 0.0, out)
    return out


def ttc(car: State, ped: State, radius: float, cap: float = TTC_CAP) -> float:
    """Time until the pedestrian comes within ``radius`` of the car point."""
    return float(
        ttc_array(ped.x - car.x, ped.y - car.y, ped.vx - car.vx, ped.vy - car.vy, radius, cap)
    )


def rect_distance(px, py, xmin, xmax, ymin, ymax) -> np.ndarray:
    """Euclidean distance from points to an axis-aligned rectangle, 0 inside."""
    ddx = np.maximum(np.maximum(xmin - px, px - xmax), 0.0)
    ddy = np.maximum(np.maximum(ymin - py, py - ymax), 0.0)
    return np.hypot(ddx, ddy)


def segment_distance(px, py, x0, x1, y) -> np.ndarray:
    """Distance from points to the horizontal segment ``[x0, x1] x {y}``."""
    ddx = np.maximum(np.maximum(x0 - px, px - x1), 0.0)
    return np.hypot(ddx, py - y)
