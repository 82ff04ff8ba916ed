"""Necessary conditions for maximal-distance minimizers, checked on finite data.

A candidate is sampled, every sample is labelled E (non-isolated energetic),
X (isolated energetic) or S (non-energetic), and a fixed rule set is run:

* R0_embedding        polylines simple and pairwise interior-disjoint
* R1_acyclic          no cycles
* R2_degree           every point has at most three branches
* R3_tangent_angles   pairwise tangent-ray angles at least 2pi/3
* R4_tripod           branch points are straight non-energetic regular tripods
* R5_energetic_rays   E points carry one or two tangent rays
* R6_curvature        |curvature| <= 1/r at two-sided E points, no bending
                      toward the witness at one-sided E points
* R7_finite_branching branch count stable under refinement

Ahlfors ratios are reported alongside but are not part of the verdict.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .energy import EnergeticWitness, PointCloud, find_energetic, is_feasible
from .geometry import TWO_PI_3, Point, vector_angle
from .kernels import ball_lengths
from .sigma import SampleSet, SigmaGraph, embedding_violations, has_cycle, sample_sigma

RAY_WINDOW = 7
TOL_ANGLE_FIXTURE = 1e-3
TOL_ANGLE_OPTIMIZER = 5e-2
RHO_ISO_FACTOR = 20.0


class InfeasibleError(ValueError):
    """The candidate does not cover M within the requested radius."""


@dataclass(frozen=True, eq=False)
class Classification:
    samples: SampleSet
    labels: np.ndarray  # 'E', 'X' or 'S' per sample
    rays: tuple  # per sample: array (k, 2) of unit tangent rays
    witnesses: tuple  # per sample: tuple of EnergeticWitness
    rho_iso: float
    ambiguous: tuple = ()
    r: float = float("nan")

    @property
    def degree(self) -> np.ndarray:
        return np.array([len(rs) for rs in self.rays])

    def indices(self, label: str) -> np.ndarray:
        return np.nonzero(self.labels == label)[0]

    def counts(self) -> dict:
        return {k: int(np.sum(self.labels == k)) for k in ("E", "X", "S")}


@dataclass(frozen=True)
class RuleResult:
    """Outcome of one rule; ``margin`` is the rule's worst statistic."""

    name: str
    passed: bool
    margin: float
    tolerance: float
    offending: tuple = ()
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"name": self.name, "pass": self.passed, "margin": _json_float(self.margin),
                "tolerance": self.tolerance,
                "offending": [[float(x), float(y)] for x, y in self.offending[:50]],
                "n_offending": len(self.offending), "detail": self.detail}


@dataclass(frozen=True)
class AhlforsReport:
    c_hat: float
    C_hat: float
    radii: tuple
    n_centers: int
    passed: bool
    tolerance: float

    def to_dict(self) -> dict:
        return {"c_hat": self.c_hat, "C_hat": self.C_hat, "radii": list(self.radii),
                "n_centers": self.n_centers, "pass": self.passed, "tolerance": self.tolerance}


@dataclass(frozen=True)
class ValidationReport:
    rules: tuple
    ahlfors: AhlforsReport | None
    counts: dict
    inconclusive: bool = False
    e_near_x: int = 0  # E samples within rho_iso of an X sample; descriptive only

    @property
    def passed(self) -> bool:
        return all(rule.passed for rule in self.rules)

    @property
    def verdict(self) -> str:
        if not self.passed:
            return "fail"
        return "inconclusive" if self.inconclusive else "pass"

    def rule(self, name: str) -> RuleResult:
        for rule in self.rules:
            if rule.name == name or rule.name.split("_", 1)[0] == name:
                return rule
        raise KeyError(name)

    def failed(self) -> list[str]:
        return [rule.name for rule in self.rules if not rule.passed]

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "pass": self.passed,
                "rules": [rule.to_dict() for rule in self.rules],
                "ahlfors": None if self.ahlfors is None else self.ahlfors.to_dict(),
                "labels": self.counts, "inconclusive": self.inconclusive, "e_near_x": self.e_near_x}


def _json_float(x: float):
    return x if math.isfinite(x) else None


# --------------------------------------------------------------------------
# tangent rays
# --------------------------------------------------------------------------


def _branches(samples: SampleSet, i: int) -> list[np.ndarray]:
    """Sample index runs leaving sample ``i`` along each incident branch."""
    out = []
    vid = int(samples.sample_vertex[i])
    for chain in samples.chains:
        if vid >= 0:
            if chain[0] == i:
                out.append(chain[:RAY_WINDOW])
            if chain[-1] == i:
                out.append(chain[::-1][:RAY_WINDOW])
        else:
            hit = np.nonzero(chain == i)[0]
            if len(hit):
                p = int(hit[0])
                out.append(chain[p:p + RAY_WINDOW])
                out.append(chain[max(0, p - RAY_WINDOW + 1):p + 1][::-1])
    return [b for b in out if len(b) >= 2]


def _interior_owner(samples: SampleSet) -> dict:
    owner = {}
    for k, chain in enumerate(samples.chains):
        for p in range(1, len(chain) - 1):
            owner[int(chain[p])] = (k, p)
    return owner


def fit_ray(points: np.ndarray) -> tuple[np.ndarray, float]:
    """Least-squares ray from ``points[0]`` through the rest; returns (unit, residual)."""
    rel = points[1:] - points[0]
    cov = rel.T @ rel
    w, v = np.linalg.eigh(cov)
    u = v[:, 1]
    if np.dot(u, rel[-1]) < 0:
        u = -u
    resid = float(np.abs(rel @ np.array([-u[1], u[0]])).max())
    return u, resid


def estimate_rays(samples: SampleSet) -> tuple:
    rays = []
    for i in range(len(samples)):
        br = _branches(samples, i)
        rays.append(np.array([fit_ray(samples.points[b])[0] for b in br]).reshape(-1, 2))
    return tuple(rays)


# --------------------------------------------------------------------------
# classification
# --------------------------------------------------------------------------


def default_step(g: SigmaGraph) -> float:
    a, b, _ = g.segments()
    seg = np.hypot(*(b - a).T)
    med = float(np.median(seg[seg > 0])) if np.any(seg > 0) else 0.0
    return min(med, g.diameter / 100.0)


def label_samples(samples: SampleSet, witnesses: list[EnergeticWitness], rho_iso: float):
    per = [[] for _ in range(len(samples))]
    for w in witnesses:
        per[w.x_index].append(w)
    labels = np.full(len(samples), "S", dtype="<U1")
    hit = np.array([i for i, ws in enumerate(per) if ws], dtype=np.int64)
    ambiguous = []
    if len(hit):
        from scipy.spatial import cKDTree

        pts = samples.points[hit]
        if len(hit) > 1:
            d, _ = cKDTree(pts).query(pts, k=2)
            nearest = d[:, 1]
        else:
            nearest = np.array([np.inf])
        for i, dn in zip(hit, nearest):
            labels[i] = "X" if dn > rho_iso else "E"
            if 0.5 * rho_iso < dn <= 2.0 * rho_iso:
                ambiguous.append(int(i))
    return labels, tuple(tuple(ws) for ws in per), tuple(ambiguous)


def classify(m: PointCloud, g: SigmaGraph, r: float, eta: float | None = None,
             step: float | None = None, rho_iso: float | None = None) -> Classification:
    """Label every sample of ``g`` as E, X or S from its energetic witnesses."""
    eta = 1e-6 * r if eta is None else eta
    if not is_feasible(m, g, r, eta):
        raise InfeasibleError("candidate does not cover M within r")
    step = default_step(g) if step is None else step
    samples = sample_sigma(g, step if step > 0 else None)
    rho_iso = RHO_ISO_FACTOR * samples.step if rho_iso is None else rho_iso
    wit = find_energetic(m, g, r, eta, samples)
    labels, per, ambiguous = label_samples(samples, wit, rho_iso)
    return Classification(samples, labels, estimate_rays(samples), per, rho_iso, ambiguous, r)


# --------------------------------------------------------------------------
# rules
# --------------------------------------------------------------------------


def _pair_angles(rays: np.ndarray) -> list[float]:
    return [vector_angle(rays[a], rays[b]) for a in range(len(rays)) for b in range(a + 1, len(rays))]


def check_structure(g: SigmaGraph, cls: Classification, tol_angle: float = TOL_ANGLE_FIXTURE) -> list[RuleResult]:
    """Rules R0-R5 and R7; each reports its worst statistic as the margin."""
    pts = cls.samples.points
    deg = cls.degree
    out = []

    bad = embedding_violations(g)
    a, b, _ = g.segments()
    out.append(RuleResult("R0_embedding", not bad, float(len(bad)), 0.0,
                          tuple(tuple(0.5 * (a[i] + b[i])) for i, _ in bad)))

    ncyc = len(g.edges) - g.n_vertices + _n_components(g)
    out.append(RuleResult("R1_acyclic", not has_cycle(g), float(-ncyc), 0.0,
                          tuple(tuple(g.vertex(v)) for v in g.vertex_ids if g.degree[v] >= 2) if ncyc else ()))

    over = [i for i in range(len(pts)) if deg[i] > 3]
    out.append(RuleResult("R2_degree", not over, float(3 - deg.max()) if len(deg) else 3.0, 0.0,
                          tuple(tuple(pts[i]) for i in over)))

    worst, offend = math.inf, []
    for i in range(len(pts)):
        if not 2 <= deg[i] <= 3:
            continue
        low = min(_pair_angles(cls.rays[i])) - TWO_PI_3
        worst = min(worst, low)
        if low < -tol_angle:
            offend.append(tuple(pts[i]))
    out.append(RuleResult("R3_tangent_angles", not offend, worst, tol_angle, tuple(offend)))

    worst, offend = 0.0, []
    for vid in g.vertex_ids:
        if g.degree[vid] != 3:
            continue
        i = cls.samples.vertex_sample[vid]
        dev = max(abs(x - TWO_PI_3) for x in _pair_angles(cls.rays[i]))
        branches = _branches(cls.samples, i)
        span = max(float(np.linalg.norm(pts[br[-1]] - pts[i])) for br in branches)
        resid = max(fit_ray(pts[br])[1] for br in branches)
        worst = max(worst, dev)
        if dev > tol_angle or resid > tol_angle * span or cls.labels[i] != "S":
            offend.append(tuple(pts[i]))
    out.append(RuleResult("R4_tripod", not offend, worst, tol_angle, tuple(offend)))

    e_idx = cls.indices("E")
    off = [i for i in e_idx if deg[i] not in (1, 2)]
    out.append(RuleResult("R5_energetic_rays", not off, float(len(off)), 0.0,
                          tuple(tuple(pts[i]) for i in off)))

    branch = sum(1 for v in g.vertex_ids if g.degree[v] >= 3)
    finer = g.refined(max(cls.samples.step, 1e-300) / 2.0) if cls.samples.step > 0 else g
    branch2 = sum(1 for v in finer.vertex_ids if finer.degree[v] >= 3)
    out.append(RuleResult("R7_finite_branching", branch2 <= branch, float(branch2 - branch), 0.0,
                          detail={"branch_points": branch, "after_refinement": branch2}))
    return out


def _n_components(g: SigmaGraph) -> int:
    from .sigma import _components

    return int(_components(g)[0])


def discrete_curvature(p0, p1, p2) -> float:
    """Signed curvature of the circle through three consecutive samples (left turn > 0)."""
    p0, p1, p2 = (np.asarray(p, dtype=float) for p in (p0, p1, p2))
    u, w = p1 - p0, p2 - p1
    cr = u[0] * w[1] - u[1] * w[0]
    den = math.hypot(*u) * math.hypot(*w) * math.hypot(*(p2 - p0))
    return 0.0 if den == 0.0 else 2.0 * cr / den


def check_curvature_bound(g: SigmaGraph, cls: Classification, r: float,
                          tol_kappa: float | None = None, tol_turn: float = 1e-9) -> RuleResult:
    """R6: curvature bound at two-sided E points, convexity at one-sided ones."""
    tol_kappa = 1e-2 / r if tol_kappa is None else tol_kappa
    pts = cls.samples.points
    owner = _interior_owner(cls.samples)
    kappas, offend = [], []
    worst_two_sided = 0.0
    worst_turn = -math.inf
    n_two = n_one = 0
    e_idx = cls.indices("E")
    if len(e_idx) and not owner:
        raise ValueError("insufficient samples for curvature triples")
    for i in e_idx:
        if int(i) not in owner:
            continue
        k, p = owner[int(i)]
        chain = cls.samples.chains[k]
        p0, p1, p2 = pts[chain[p - 1]], pts[i], pts[chain[p + 1]]
        kap = discrete_curvature(p0, p1, p2)
        kappas.append(abs(kap))
        tangent = p2 - p0
        sides = {int(np.sign(tangent[0] * (w.y[1] - p1[1]) - tangent[1] * (w.y[0] - p1[0])))
                 for w in cls.witnesses[i]} - {0}
        if len(sides) == 2:
            n_two += 1
            worst_two_sided = max(worst_two_sided, abs(kap))
            if abs(kap) > 1.0 / r + tol_kappa:
                offend.append(tuple(p1))
        elif len(sides) == 1:
            n_one += 1
            side = sides.pop()
            u, w = p1 - p0, p2 - p1
            turn = math.atan2(u[0] * w[1] - u[1] * w[0], float(np.dot(u, w)))
            worst_turn = max(worst_turn, turn * side)
            if turn * side > tol_turn:
                offend.append(tuple(p1))
    kap = np.array(kappas)
    detail = {
        "kappa_max": float(kap.max()) if len(kap) else 0.0,
        "kappa_median": float(np.median(kap)) if len(kap) else 0.0,
        "kappa_bound": 1.0 / r,
        "two_sided_points": n_two,
        "one_sided_points": n_one,
        "worst_two_sided_kappa": worst_two_sided,
        "worst_turn_toward_witness": worst_turn if math.isfinite(worst_turn) else None,
    }
    return RuleResult("R6_curvature", not offend, worst_two_sided - 1.0 / r, tol_kappa, tuple(offend), detail)


def check_ahlfors(g: SigmaGraph, radii=None, centers: np.ndarray | None = None,
                  tol: float = 0.05, max_centers: int = 400) -> AhlforsReport:
    """Empirical Ahlfors constants min/max of length(Sigma within B_rho(x)) / rho."""
    diam = g.diameter
    if radii is None:
        radii = [diam / 64.0, diam / 128.0, diam / 256.0]
    radii = np.asarray(radii, dtype=float)
    if np.any(radii >= diam) or np.any(radii <= 0):
        raise ValueError("Ahlfors radii must lie in (0, diam)")
    if centers is None:
        samples = sample_sigma(g, default_step(g) or None)
        pts = samples.points
        stride = max(1, len(pts) // max_centers)
        centers = np.vstack([g.coords, pts[::stride]])
    a, b, _ = g.segments()
    ratio = ball_lengths(centers, a, b, radii) / radii
    c_hat, C_hat = float(ratio.min()), float(ratio.max())
    return AhlforsReport(c_hat, C_hat, tuple(float(x) for x in radii), len(centers),
                         c_hat >= 1.0 - tol and C_hat <= 3.0 + tol, tol)


def validate(m: PointCloud, g: SigmaGraph, r: float, tol_angle: float = TOL_ANGLE_FIXTURE,
             rho_iso: float | None = None, radii=None, eta: float | None = None,
             classification: Classification | None = None) -> ValidationReport:
    """Classify and run every rule; ``classification`` overrides the computed one."""
    cls = classification if classification is not None else classify(m, g, r, eta=eta, rho_iso=rho_iso)
    rules = check_structure(g, cls, tol_angle)
    rules.append(check_curvature_bound(g, cls, r))
    rules.sort(key=lambda rule: rule.name)
    ahl = check_ahlfors(g, radii) if g.diameter > 0 else None
    return ValidationReport(tuple(rules), ahl, cls.counts(), bool(cls.ambiguous), _e_near_x(cls))


def _e_near_x(cls: Classification) -> int:
    e, x = cls.indices("E"), cls.indices("X")
    if not len(e) or not len(x):
        return 0
    from scipy.spatial import cKDTree

    d, _ = cKDTree(cls.samples.points[x]).query(cls.samples.points[e])
    return int(np.sum(d <= cls.rho_iso))


def synthetic_classification(g: SigmaGraph, r: float, both_sides: bool = True,
                             step: float | None = None, rho_iso: float | None = None) -> Classification:
    """Every interior sample witnessed at distance r along its normal(s).

    Used for curves whose real witnesses cannot be produced by a finite M.
    """
    samples = sample_sigma(g, step)
    pts = samples.points
    owner = _interior_owner(samples)
    wit = []
    for i, (k, p) in sorted(owner.items()):
        chain = samples.chains[k]
        t = pts[chain[p + 1]] - pts[chain[p - 1]]
        n = np.array([-t[1], t[0]]) / math.hypot(*t)
        for s in ((1.0, -1.0) if both_sides else (1.0,)):
            y = pts[i] + s * r * n
            wit.append(EnergeticWitness(Point(*pts[i]), Point(*y), 0.0, 0.0, i, -1))
    rho_iso = RHO_ISO_FACTOR * samples.step if rho_iso is None else rho_iso
    labels, per, ambiguous = label_samples(samples, wit, rho_iso)
    return Classification(samples, labels, estimate_rays(samples), per, rho_iso, ambiguous, r)
