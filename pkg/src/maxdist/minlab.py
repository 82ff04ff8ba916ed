"""Explicit constructions: the finite-M certificate, trimmed trees, the horseshoe."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .energy import PointCloud, energy
from .sigma import SigmaGraph, is_connected, point_set_diameter, total_length
from .steiner import MAX_EXACT_TERMINALS, SteinerError, steiner_exact
from .validator import (
    TOL_ANGLE_FIXTURE,
    Classification,
    ValidationReport,
    synthetic_classification,
    validate,
)

HORSESHOE_RATIO = 4.98
HORSESHOE_RATIO_ALT = 5.0
LEN_TOL_FACTOR = 1e-9

CERTIFIED = "certified_minimizer"
NOT_MINIMIZER = "not_minimizer"
INCONCLUSIVE = "inconclusive"


# --------------------------------------------------------------------------
# finite M
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CriterionReport:
    steiner_length: float
    sigma_length: float
    r: float
    n_points: int
    bound: float
    margin: float
    feasible: bool
    energy: float
    tol_len: float
    verdict: str

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _finite_points(m: PointCloud) -> np.ndarray:
    pts = np.unique(m.points, axis=0)
    if len(pts) < 2:
        raise ValueError("the certificate needs at least two distinct points")
    if len(pts) > MAX_EXACT_TERMINALS:
        raise ValueError(f"exact Steiner trees are limited to {MAX_EXACT_TERMINALS} points, got {len(pts)}")
    return pts


def criterion_check(m: PointCloud, g: SigmaGraph, r: float) -> CriterionReport:
    """Certify ``g`` as a minimizer for finite ``m`` by comparing its length with
    (Steiner tree length) - r * (number of points).

    Every feasible connected set is at least that long, so equality up to
    ``tol_len`` is a certificate and a longer set is not a minimizer.
    """
    if not r > 0:
        raise ValueError("r must be positive")
    pts = _finite_points(m)
    if not is_connected(g):
        raise ValueError("candidate is not connected")
    tree = steiner_exact(pts)
    n = len(pts)
    scale = max(point_set_diameter(pts), r)
    tol_len = LEN_TOL_FACTOR * scale
    eta = 0.1 * tol_len / n
    f = energy(PointCloud(pts, m.delta), g).value
    sigma_len = total_length(g)
    bound = tree.length - r * n
    margin = bound - sigma_len
    feasible = f <= r + eta
    if not feasible:
        verdict = INCONCLUSIVE if f <= r + eta + m.delta else NOT_MINIMIZER
    elif margin >= -tol_len:
        if margin > tol_len:
            raise ValueError(
                f"feasible connected candidate is shorter than the lower bound by {margin:.3e}; input inconsistent")
        verdict = CERTIFIED
    else:
        verdict = NOT_MINIMIZER
    return CriterionReport(tree.length, sigma_len, float(r), n, bound, margin, feasible, f, tol_len, verdict)


def trimmed_tree(m: PointCloud, r: float) -> SigmaGraph:
    """The Steiner tree of M with every terminal edge shortened by ``r`` at its terminal end.

    Needs a full Steiner tree (each terminal a leaf) whose terminal edges are
    longer than ``r``; an edge joining two terminals must exceed ``2r``.
    """
    if not r > 0:
        raise ValueError("r must be positive")
    pts = _finite_points(m)
    tree = steiner_exact(pts)
    n = tree.n_terminals
    deg = tree.degrees()
    if not tree.is_full:
        bad = [tuple(tree.terminals[i]) for i in range(n) if deg[i] != 1]
        raise SteinerError(f"terminals {bad} are interior to the Steiner tree; trimming would disconnect it")
    nodes = tree.nodes.copy()
    new = nodes.copy()
    for i, j in tree.edges:
        budget = r * ((i < n) + (j < n))
        length = math.hypot(*(nodes[j] - nodes[i]))
        if length <= budget:
            raise SteinerError(
                f"terminal edge {tuple(nodes[i])}-{tuple(nodes[j])} has length {length:.6g} <= trim {budget:.6g}")
        u = (nodes[j] - nodes[i]) / length
        if i < n:
            new[i] = nodes[i] + r * u
        if j < n:
            new[j] = nodes[j] - r * u
    return SigmaGraph(list(enumerate(new)), [(k, i, j, None) for k, (i, j) in enumerate(tree.edges)],
                      provenance="trimmed-steiner")


# --------------------------------------------------------------------------
# horseshoe
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class HorseshoeParams:
    R: float
    r: float
    center: tuple
    gap_direction: float
    arc_sweep: float
    tangent_length: float
    half_gap: float
    length: float
    energy: float
    validity_ratio: float = HORSESHOE_RATIO
    alternative_ratio: float = HORSESHOE_RATIO_ALT
    notes: dict = field(default_factory=dict)

    @property
    def resolved(self) -> dict:
        return {"arc_sweep": self.arc_sweep, "tangent_length": self.tangent_length}

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["center"] = list(self.center)
        d["resolved"] = self.resolved
        return d


def _tangent_reach(R: float, r: float, psi: np.ndarray) -> np.ndarray:
    """Tangent length needed to cover the M point at angle ``psi`` past the tangency point."""
    rho = R - r
    off = R * np.cos(psi) - rho
    rad = r * r - off * off
    # rounding can push the tangency point itself just outside the ball
    rad = np.where((rad < 0) & (rad > -1e-12 * r * r), 0.0, rad)
    with np.errstate(invalid="ignore"):
        return R * np.sin(psi) - np.sqrt(rad)


def tangent_needed(R: float, r: float, half_gap: float) -> float:
    """Shortest tangent segment covering M between the arc end and the gap axis."""
    psi = np.linspace(0.0, half_gap, 2001)
    vals = _tangent_reach(R, r, psi)
    if np.any(np.isnan(vals)):
        return math.inf
    k = int(np.argmax(vals))
    lo, hi = psi[max(k - 1, 0)], psi[min(k + 1, len(psi) - 1)]
    if hi > lo:
        res = minimize_scalar(lambda s: -float(_tangent_reach(R, r, np.array(s))), bounds=(lo, hi),
                              method="bounded", options={"xatol": 1e-14})
        best = max(float(vals[k]), -float(res.fun), float(vals[-1]))
    else:
        best = float(vals[k])
    return max(best, 0.0)


def horseshoe_length(R: float, r: float, half_gap: float) -> float:
    rho = R - r
    t = tangent_needed(R, r, half_gap)
    if not math.isfinite(t) or t >= rho * math.tan(half_gap):
        return math.inf
    return 2.0 * rho * (math.pi - half_gap) + 2.0 * t


def _resolve_gap(R: float, r: float) -> float:
    upper = math.acos(max(-1.0, (R - 2.0 * r) / R))
    grid = np.linspace(1e-4, upper, 400)
    vals = np.array([horseshoe_length(R, r, p) for p in grid])
    if not np.any(np.isfinite(vals)):
        raise ValueError("no member of the horseshoe family covers M")
    k = int(np.argmin(vals))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    res = minimize_scalar(lambda p: horseshoe_length(R, r, p), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-13})
    return float(res.x) if res.fun <= vals[k] else float(grid[k])


def horseshoe(R: float, r: float, samples: int = 5000, center=(0.0, 0.0),
              gap_direction: float = 0.0) -> tuple[PointCloud, SigmaGraph, HorseshoeParams]:
    """Arc of radius R - r plus two tangent segments covering the circle of radius R.

    The half-gap angle is chosen to minimise length in the family; the tangent
    length is the least that still covers the gap.  Arc vertices sit at the M
    sample angles so that the arc's radial distances are exactly ``r``.
    """
    if not (r > 0 and R > HORSESHOE_RATIO * r):
        raise ValueError(f"horseshoe needs R > {HORSESHOE_RATIO} r (got R={R}, r={r})")
    if samples < 1000:
        raise ValueError("horseshoe needs at least 1000 samples of M")
    rho = R - r
    phi = _resolve_gap(R, r)
    t = tangent_needed(R, r, phi)
    cx, cy = float(center[0]), float(center[1])
    m = PointCloud.circle(R, samples, center=(cx, cy), start_angle=gap_direction)

    # arc angles measured from the gap direction, running from phi to 2pi - phi
    theta = 2.0 * math.pi * np.arange(samples) / samples
    gap_eps = 1e-9
    inner = theta[(theta > phi + gap_eps) & (theta < 2.0 * math.pi - phi - gap_eps)]
    arc_ang = np.concatenate([[phi], inner, [2.0 * math.pi - phi]]) + gap_direction
    arc = np.column_stack([cx + rho * np.cos(arc_ang), cy + rho * np.sin(arc_ang)])

    def tangent_end(sign: float) -> np.ndarray:
        a = gap_direction + sign * phi
        p = np.array([cx + rho * math.cos(a), cy + rho * math.sin(a)])
        d = np.array([sign * math.sin(a), -sign * math.cos(a)])
        return p + t * d

    d1, d2 = tangent_end(1.0), tangent_end(-1.0)
    g = SigmaGraph(
        [(0, d1), (1, arc[0]), (2, arc[-1]), (3, d2)],
        [(0, 0, 1, None), (1, 1, 2, arc), (2, 2, 3, None)],
        provenance="horseshoe",
    )
    f = energy(m, g).value
    if abs(f - r) > 1e-10 * r:
        raise ValueError(f"covering equation unresolved: max distance {f!r}, r = {r!r}")
    params = HorseshoeParams(
        float(R), float(r), (cx, cy), float(gap_direction), 2.0 * (math.pi - phi), t, phi,
        total_length(g), f,
        notes={"full_circle_length": 2.0 * math.pi * rho,
               "satisfies_alternative_ratio": bool(R > HORSESHOE_RATIO_ALT * r)},
    )
    return m, g, params


# --------------------------------------------------------------------------
# fixture roster
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Fixture:
    name: str
    m: PointCloud
    g: SigmaGraph
    r: float
    expected_failure: str | None = None
    classification: Classification | None = None
    tol_angle: float = TOL_ANGLE_FIXTURE

    def run(self) -> ValidationReport:
        return validate(self.m, self.g, self.r, tol_angle=self.tol_angle, classification=self.classification)


def _polar(angle_deg: float) -> np.ndarray:
    a = math.radians(angle_deg)
    return np.array([math.cos(a), math.sin(a)])


def corner_fixture(opening_deg: float, r: float = 0.1, arm: float = 1.0, name: str | None = None) -> Fixture:
    """Two arms meeting at the origin with the given opening, symmetric about the downward axis.

    M holds the two far witnesses at distance ``r`` beyond the arm ends and one
    point on the outer bisector at distance ``r`` from the corner.
    """
    h = opening_deg / 2.0
    d1, d2 = _polar(270.0 - h), _polar(270.0 + h)
    m = PointCloud.finite([(0.0, r), (arm + r) * d1, (arm + r) * d2])
    g = SigmaGraph.from_polyline([arm * d1, (0.0, 0.0), arm * d2], provenance=f"corner-{opening_deg:g}")
    return Fixture(name or f"corner_{opening_deg:g}deg", m, g, r)


def positive_fixtures(horseshoe_samples: int = 5000) -> list[Fixture]:
    out = []
    m2 = PointCloud.finite([(0.0, 0.0), (1.0, 0.0)])
    out.append(Fixture("trimmed_segment", m2, trimmed_tree(m2, 0.2), 0.2))
    tri = PointCloud.finite([(0.0, 0.0), (1.0, 0.0), (0.5, math.sqrt(3.0) / 2.0)])
    out.append(Fixture("trimmed_tripod", tri, trimmed_tree(tri, 0.1), 0.1))
    out.append(corner_fixture(120.0, name="corner_exact_2pi3"))
    out.append(corner_fixture(150.0, name="corner_obtuse_150deg"))
    m, g, _ = horseshoe(5.0, 1.0, horseshoe_samples)
    out.append(Fixture("horseshoe", m, g, 1.0))
    return out


def oscillating_curve(kind: str = "sin_inv_x", half_width: float = 0.1, x_min: float = 2e-3,
                      phase_step: float = 0.05) -> SigmaGraph:
    """Graph of x^2 sin(1/x) (or x^2 sin(1/sqrt|x|)) on [-w, w].

    Abscissae are spaced so that the phase advances by at most ``phase_step``
    between samples; the stretch (-x_min, x_min) is bridged through the origin.
    """
    if kind == "sin_inv_x":
        f = lambda x: x * x * np.sin(1.0 / x)  # noqa: E731
        dphase = lambda x: 1.0 / (x * x)  # noqa: E731
    elif kind == "sin_inv_sqrt":
        f = lambda x: x * x * np.sin(1.0 / np.sqrt(x))  # noqa: E731
        dphase = lambda x: 0.5 * x ** -1.5  # noqa: E731
    else:
        raise ValueError(f"unknown curve {kind!r}")
    xs = [x_min]
    coarse = half_width / 200.0
    while xs[-1] < half_width:
        xs.append(xs[-1] + min(coarse, phase_step / dphase(xs[-1])))
    x = np.array(xs[:-1] + [half_width])
    y = f(x)
    pts = np.vstack([np.column_stack([-x[::-1], y[::-1]]), [[0.0, 0.0]], np.column_stack([x, y])])
    return SigmaGraph.from_polyline(pts, provenance=f"oscillating-{kind}")


def negative_fixtures(circle_samples: int = 1000) -> list[Fixture]:
    """Candidates that violate one necessary condition each; ``expected_failure`` names it."""
    out = []
    R, r = 5.0, 1.0
    m = PointCloud.circle(R, circle_samples)
    theta = 2.0 * math.pi * np.arange(circle_samples) / circle_samples
    ring = np.column_stack([(R - r) * np.cos(theta), (R - r) * np.sin(theta)])
    out.append(Fixture("circle_cycle", m, SigmaGraph.from_polyline(ring, closed=True, provenance="circle"),
                       r, "R1_acyclic"))

    rc = 0.1
    tips = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)]
    cross = SigmaGraph([(0, (0.0, 0.0))] + [(k + 1, p) for k, p in enumerate(tips)],
                       [(k, 0, k + 1, None) for k in range(4)], provenance="cross")
    out.append(Fixture("degree4_cross", PointCloud.finite([(1.0 + rc) * np.array(p) for p in tips]),
                       cross, rc, "R2_degree"))

    corner = SigmaGraph.from_polyline([(-1.0, 0.0), (0.0, 0.0), (0.0, 1.0)], provenance="corner-90")
    out.append(Fixture("corner_90deg", PointCloud.finite([(-1.0 - rc, 0.0), (0.0, 1.0 + rc)]),
                       corner, rc, "R3_tangent_angles"))

    ro = 0.05
    curve = oscillating_curve("sin_inv_x")
    cls = synthetic_classification(curve, ro, both_sides=True)
    ys = np.array([w.y for ws in cls.witnesses for w in ws])
    out.append(Fixture("oscillating_x2_sin_inv_x", PointCloud.finite(ys), curve, ro, "R6_curvature", cls))
    return out


def validate_example_suite(horseshoe_samples: int = 5000) -> list[tuple[str, ValidationReport]]:
    """Run the validator on every positive fixture."""
    return [(fx.name, fx.run()) for fx in positive_fixtures(horseshoe_samples)]
