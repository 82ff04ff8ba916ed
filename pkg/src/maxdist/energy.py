"""The maximal-distance functional, feasibility, and energetic points."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .geometry import GeometryError, Point, as_points
from .kernels import nearest_on_segments
from .sigma import SampleSet, SigmaGraph, sample_sigma


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Finite sample of a compact set M.

    ``delta`` bounds the distance from any point of the intended compact to
    the nearest sample (0 for a genuinely finite M).
    """

    points: np.ndarray
    delta: float = 0.0

    def __post_init__(self):
        pts = as_points(self.points).copy()
        if len(pts) == 0:
            raise GeometryError("point cloud is empty")
        if not self.delta >= 0.0:
            raise GeometryError("delta must be non-negative")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "delta", float(self.delta))

    def __len__(self):
        return len(self.points)

    def to_dict(self) -> dict:
        return {"delta": self.delta, "points": [[float(x), float(y)] for x, y in self.points]}

    @classmethod
    def from_dict(cls, d: dict) -> "PointCloud":
        extra = set(d) - {"delta", "points"}
        if extra:
            raise ValueError(f"unknown PointCloud fields: {sorted(extra)}")
        return cls(np.array(d["points"], dtype=np.float64).reshape(-1, 2), d.get("delta", 0.0))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "PointCloud":
        return cls.from_dict(json.loads(text))

    # built-in compacts

    @classmethod
    def circle(cls, radius: float, n: int, center=(0.0, 0.0), start_angle: float = 0.0) -> "PointCloud":
        theta = start_angle + 2.0 * math.pi * np.arange(n) / n
        pts = np.column_stack([center[0] + radius * np.cos(theta), center[1] + radius * np.sin(theta)])
        # half the chord between neighbouring samples
        return cls(pts, radius * math.sin(math.pi / n))

    @classmethod
    def segment(cls, a, b, n: int) -> "PointCloud":
        a = np.asarray(a, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        t = np.linspace(0.0, 1.0, n)[:, None]
        step = float(np.hypot(*(b - a))) / max(n - 1, 1)
        return cls(a + t * (b - a), 0.5 * step)

    @classmethod
    def finite(cls, pts) -> "PointCloud":
        return cls(as_points(pts), 0.0)

    def transformed(self, fn) -> "PointCloud":
        return PointCloud(fn(self.points), self.delta)


@dataclass(frozen=True, eq=False)
class EnergyResult:
    value: float
    argmax: Point
    argmax_index: int
    per_point: np.ndarray | None = None


@dataclass(frozen=True)
class EnergeticWitness:
    x: Point
    y: Point
    slack: float
    ball_clearance: float
    x_index: int = -1
    y_index: int = -1

    def accepted(self, eta: float) -> bool:
        return self.slack <= eta and self.ball_clearance >= -eta


def distances(m: PointCloud, g: SigmaGraph) -> np.ndarray:
    if g.n_vertices == 0:
        raise GeometryError("empty graph")
    a, b, _ = g.segments()
    d, _, _ = nearest_on_segments(m.points, a, b)
    return d


def energy(m: PointCloud, g: SigmaGraph, per_point: bool = False) -> EnergyResult:
    """The largest distance from a sample of M to the graph."""
    d = distances(m, g)
    i = int(np.argmax(d))  # first maximum wins
    return EnergyResult(float(d[i]), Point(*m.points[i]), i, d if per_point else None)


def is_feasible(m: PointCloud, g: SigmaGraph, r: float, eta: float = 1e-9) -> bool:
    if not r > 0:
        raise ValueError("r must be positive")
    return energy(m, g).value <= r + eta


def default_eta(r: float) -> float:
    return 1e-6 * r


def find_energetic(m: PointCloud, g: SigmaGraph, r: float, eta: float | None = None,
                   samples: SampleSet | None = None) -> list[EnergeticWitness]:
    """Witness pairs (x, y): x a graph sample, y in M with |xy| = r and B_r(y) free of the graph.

    Both gates are applied with tolerance ``eta`` (default ``1e-6 * r``).  The
    result is ordered by sample index, then by M index.
    """
    eta = default_eta(r) if eta is None else float(eta)
    if samples is None:
        samples = sample_sigma(g)
    dy = distances(m, g)
    clearance = dy - r
    free = np.nonzero(clearance >= -eta)[0]
    if len(free) == 0:
        return []
    tree = cKDTree(m.points[free])
    hits = tree.query_ball_point(samples.points, r + eta)
    out = []
    for i, cand in enumerate(hits):
        if not cand:
            continue
        x = samples.points[i]
        for j in sorted(free[c] for c in cand):
            y = m.points[j]
            slack = abs(r - math.hypot(x[0] - y[0], x[1] - y[1]))
            w = EnergeticWitness(Point(*x), Point(*y), slack, float(clearance[j]), i, int(j))
            if w.accepted(eta):
                out.append(w)
    return out
