"""Planar primitives: points, segments, circular arcs, angles and distances."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

TWO_PI_3 = 2.0 * math.pi / 3.0


class GeometryError(ValueError):
    """Raised for degenerate or non-finite geometric input."""


class Point(NamedTuple):
    x: float
    y: float

    @classmethod
    def of(cls, p) -> "Point":
        x, y = float(p[0]), float(p[1])
        if not (math.isfinite(x) and math.isfinite(y)):
            raise GeometryError(f"non-finite point ({x}, {y})")
        return cls(x, y)


def as_xy(p) -> np.ndarray:
    arr = np.asarray(p, dtype=np.float64)
    if arr.shape != (2,):
        raise GeometryError(f"expected a 2-vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise GeometryError("non-finite coordinates")
    return arr


def as_points(pts) -> np.ndarray:
    arr = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
    if not np.all(np.isfinite(arr)):
        raise GeometryError("non-finite coordinates")
    return arr


@dataclass(frozen=True)
class Segment:
    a: Point
    b: Point

    def __post_init__(self):
        object.__setattr__(self, "a", Point.of(self.a))
        object.__setattr__(self, "b", Point.of(self.b))
        if self.length <= 0.0:
            raise GeometryError("degenerate segment")

    @property
    def length(self) -> float:
        return math.hypot(self.b.x - self.a.x, self.b.y - self.a.y)


@dataclass(frozen=True)
class CircularArc:
    """Arc of the circle ``center``/``radius`` from ``theta_start`` to ``theta_end``.

    ``orientation`` is ``"ccw"`` or ``"cw"``; the sweep is measured in that
    direction and must lie in (0, 2*pi].
    """

    center: Point
    radius: float
    theta_start: float
    theta_end: float
    orientation: str = "ccw"

    def __post_init__(self):
        object.__setattr__(self, "center", Point.of(self.center))
        if not self.radius > 0.0:
            raise GeometryError("arc radius must be positive")
        if self.orientation not in ("ccw", "cw"):
            raise GeometryError(f"unknown orientation {self.orientation!r}")
        sweep = self.sweep
        if not (0.0 < sweep <= 2.0 * math.pi + 1e-12):
            raise GeometryError(f"arc sweep {sweep} outside (0, 2pi]")

    @property
    def sweep(self) -> float:
        d = self.theta_end - self.theta_start
        return d if self.orientation == "ccw" else -d

    @property
    def length(self) -> float:
        return self.radius * self.sweep


def dist_point_segment(p, s: Segment) -> float:
    """Euclidean distance from ``p`` to the closed segment ``s``."""
    px, py = as_xy(p)
    ax, ay = s.a
    dx, dy = s.b.x - ax, s.b.y - ay
    t = ((px - ax) * dx + (py - ay) * dy) / (dx * dx + dy * dy)
    t = min(max(t, 0.0), 1.0)
    if t == 0.0:
        return math.hypot(px - ax, py - ay)
    if t == 1.0:
        return math.hypot(px - s.b.x, py - s.b.y)
    # distance to the carrier line; exact zero for points on the segment
    cross = dx * (py - ay) - dy * (px - ax)
    return abs(cross) / math.hypot(dx, dy)


def angle_between_rays(v, a, b) -> float:
    """Unsigned angle in [0, pi] between the rays ``v->a`` and ``v->b``."""
    v, a, b = as_xy(v), as_xy(a), as_xy(b)
    u = a - v
    w = b - v
    if not np.any(u) or not np.any(w):
        raise GeometryError("ray endpoint coincides with the apex")
    return vector_angle(u, w)


def vector_angle(u, w) -> float:
    # atan2 form is accurate near 0 and pi, unlike acos of the dot product
    cross = u[0] * w[1] - u[1] * w[0]
    dot = u[0] * w[0] + u[1] * w[1]
    return abs(math.atan2(cross, dot))


def sample_arc(arc: CircularArc, n: int) -> list[Point]:
    """``n`` points equally spaced in angle along ``arc``, endpoints included."""
    if n < 2:
        raise GeometryError("need at least two samples")
    return [Point(float(x), float(y)) for x, y in arc_points(arc, n)]


def arc_points(arc: CircularArc, n: int) -> np.ndarray:
    if n < 2:
        raise GeometryError("need at least two samples")
    sign = 1.0 if arc.orientation == "ccw" else -1.0
    theta = arc.theta_start + sign * arc.sweep * np.arange(n) / (n - 1)
    pts = np.empty((n, 2))
    pts[:, 0] = arc.center.x + arc.radius * np.cos(theta)
    pts[:, 1] = arc.center.y + arc.radius * np.sin(theta)
    return pts


def unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    n = math.hypot(v[0], v[1])
    if n == 0.0:
        raise GeometryError("zero vector has no direction")
    return v / n


def rotate(pts, angle: float, about=(0.0, 0.0)) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    pts = np.asarray(pts, dtype=np.float64)
    about = np.asarray(about, dtype=np.float64)
    rel = pts - about
    out = np.empty_like(rel)
    out[..., 0] = c * rel[..., 0] - s * rel[..., 1]
    out[..., 1] = s * rel[..., 0] + c * rel[..., 1]
    return out + about


def cross2(u, w) -> float:
    return float(u[0] * w[1] - u[1] * w[0])
