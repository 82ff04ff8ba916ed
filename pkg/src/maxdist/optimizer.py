"""Penalised length descent over polyline trees with discrete topology moves.

The state is a straight-edge tree (vertex coordinates plus an edge list), so
cycles cannot arise.  Each phase runs L-BFGS-B on

    length(X) + w * sum_y max(0, dist(y, Sigma) - r)^2

for a fixed penalty weight ``w``; between phases at most one topology move is
tried and kept only if it lowers that objective.  A final projection pushes
the tree onto every still-uncovered sample.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.sparse.csgraph import minimum_spanning_tree
from scipy.spatial.distance import pdist, squareform

from .energy import PointCloud
from .geometry import TWO_PI_3
from .kernels import nearest_on_segments
from .sigma import SigmaGraph, has_cycle, is_connected, point_set_diameter, total_length
from .steiner import fermat_or_vertex

PHASE_ITERS = 50
INIT_KINDS = ("trimmed_steiner", "random_tree", "user")


@dataclass(frozen=True)
class OptimizerConfig:
    """Run parameters.

    ``step_size`` is the length scale of topology moves as a fraction of the
    diameter of M: split offsets use it directly, merge and delete thresholds
    a tenth of it.
    """

    r: float
    init: str = "random_tree"
    max_iters: int = 2000
    penalty_schedule: tuple = (1e1, 1e2, 1e3, 1e4, 1e5, 1e6)
    step_size: float = 1e-2
    topology_moves_enabled: bool = True
    seed: int = 0
    tol_feas: float = 1e-6
    random_points: int = 12
    init_graph: SigmaGraph | None = None
    snapshot_every: int = 0

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("r must be positive")
        if self.init not in INIT_KINDS:
            raise ValueError(f"init must be one of {INIT_KINDS}")
        if self.init == "user" and self.init_graph is None:
            raise ValueError("init='user' needs init_graph")
        sched = tuple(float(w) for w in self.penalty_schedule)
        if not sched or any(w <= 0 for w in sched) or any(b < a for a, b in zip(sched, sched[1:])):
            raise ValueError("penalty schedule must be positive and nondecreasing")
        object.__setattr__(self, "penalty_schedule", sched)
        if not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")

    def to_dict(self) -> dict:
        return {
            "r": self.r, "init": self.init, "max_iters": self.max_iters,
            "penalty_schedule": list(self.penalty_schedule), "step_size": self.step_size,
            "topology_moves_enabled": self.topology_moves_enabled, "seed": self.seed,
            "tol_feas": self.tol_feas, "random_points": self.random_points,
            "snapshot_every": self.snapshot_every,
            "init_graph": None if self.init_graph is None else self.init_graph.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OptimizerConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown OptimizerConfig fields: {sorted(extra)}")
        d = dict(d)
        if d.get("init_graph") is not None:
            d["init_graph"] = SigmaGraph.from_dict(d["init_graph"])
        if "penalty_schedule" in d:
            d["penalty_schedule"] = tuple(d["penalty_schedule"])
        return cls(**d)


@dataclass(frozen=True, eq=False)
class OptimizerTrace:
    lengths: np.ndarray
    energies: np.ndarray
    violations: np.ndarray
    weights: np.ndarray
    objectives: np.ndarray
    events: tuple
    final: SigmaGraph
    converged: bool
    final_length: float
    final_energy: float
    final_violation: float
    snapshots: tuple = ()  # (iteration, SigmaGraph) pairs; not serialised

    def __len__(self):
        return len(self.lengths)

    def to_dict(self) -> dict:
        return {
            "iterations": [{"length": float(a), "energy": float(b), "violation": float(c), "weight": float(w),
                            "objective": float(o)}
                           for a, b, c, w, o in zip(self.lengths, self.energies, self.violations, self.weights,
                                                    self.objectives)],
            "events": [dict(e) for e in self.events],
            "final": self.final.to_dict(),
            "converged": self.converged,
            "final_length": self.final_length,
            "final_energy": self.final_energy,
            "final_violation": self.final_violation,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OptimizerTrace":
        extra = set(d) - {"iterations", "events", "final", "converged", "final_length",
                          "final_energy", "final_violation"}
        if extra:
            raise ValueError(f"unknown OptimizerTrace fields: {sorted(extra)}")
        it = d["iterations"]
        col = lambda k: np.array([row[k] for row in it], dtype=float)  # noqa: E731
        return cls(col("length"), col("energy"), col("violation"), col("weight"), col("objective"),
                   tuple(d["events"]), SigmaGraph.from_dict(d["final"]), bool(d["converged"]),
                   float(d["final_length"]), float(d["final_energy"]), float(d["final_violation"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "OptimizerTrace":
        return cls.from_dict(json.loads(text))


# --------------------------------------------------------------------------
# objective
# --------------------------------------------------------------------------


def tree_length(x: np.ndarray, edges: np.ndarray) -> float:
    d = x[edges[:, 1]] - x[edges[:, 0]]
    return float(np.sum(np.hypot(d[:, 0], d[:, 1])))


def penalized_objective(x: np.ndarray, edges: np.ndarray, m: np.ndarray, r: float, w: float):
    """Value and analytic gradient of length + w * sum max(0, d_y - r)^2.

    The distance gradient uses the nearest point on the nearest segment
    (envelope theorem), split between the segment ends by the foot parameter.
    """
    x = x.reshape(-1, 2)
    grad = np.zeros_like(x)
    d = x[edges[:, 1]] - x[edges[:, 0]]
    lens = np.hypot(d[:, 0], d[:, 1])
    ok = lens > 0
    u = np.zeros_like(d)
    u[ok] = d[ok] / lens[ok, None]
    np.add.at(grad, edges[:, 1], u)
    np.add.at(grad, edges[:, 0], -u)
    value = float(np.sum(lens))

    a, b = x[edges[:, 0]], x[edges[:, 1]]
    dist, seg, t = nearest_on_segments(m, a, b)
    over = dist - r
    hit = np.nonzero(over > 0)[0]
    value += w * float(np.sum(over[hit] ** 2))
    if len(hit):
        s, th = seg[hit], t[hit]
        q = a[s] + th[:, None] * (b[s] - a[s])
        dq = (q - m[hit]) / dist[hit, None]
        coef = (2.0 * w * over[hit])[:, None] * dq
        np.add.at(grad, edges[s, 0], (1.0 - th)[:, None] * coef)
        np.add.at(grad, edges[s, 1], th[:, None] * coef)
    return value, grad.ravel()


def _coverage(x, edges, m, r):
    dist, _, _ = nearest_on_segments(m, x[edges[:, 0]], x[edges[:, 1]])
    f = float(dist.max())
    return f, max(0.0, f - r)


# --------------------------------------------------------------------------
# tree state helpers
# --------------------------------------------------------------------------


def _to_graph(x: np.ndarray, edges: np.ndarray, provenance: str = "optimizer") -> SigmaGraph:
    return SigmaGraph(list(enumerate(x)), [(k, int(i), int(j), None) for k, (i, j) in enumerate(edges)],
                      provenance)


def _from_graph(g: SigmaGraph) -> tuple[np.ndarray, np.ndarray]:
    """Flatten polylines: every polyline point becomes a tree vertex."""
    pts = [p for p in g.coords]
    edges = []
    for e in g.edges:
        prev = g.row[e.u]
        for p in e.polyline[1:-1]:
            pts.append(p)
            edges.append((prev, len(pts) - 1))
            prev = len(pts) - 1
        edges.append((prev, g.row[e.v]))
    return np.array(pts, dtype=float).reshape(-1, 2), np.array(edges, dtype=np.int64).reshape(-1, 2)


def _degrees(n: int, edges: np.ndarray) -> np.ndarray:
    return np.bincount(edges.ravel(), minlength=n)


def _neighbors(edges: np.ndarray, v: int) -> list[int]:
    out = []
    for i, j in edges:
        if i == v:
            out.append(int(j))
        elif j == v:
            out.append(int(i))
    return out


def _contract(x, edges, keep: int, drop: int, at=None):
    """Merge vertex ``drop`` into ``keep`` (optionally moving it to ``at``)."""
    x = x.copy()
    if at is not None:
        x[keep] = at
    e = edges.copy()
    e[e == drop] = keep
    e = e[e[:, 0] != e[:, 1]]
    x = np.delete(x, drop, axis=0)
    e[e > drop] -= 1
    return x, e


def _canonical_edges(edges: np.ndarray) -> np.ndarray:
    e = np.sort(edges, axis=1)
    return e[np.lexsort((e[:, 1], e[:, 0]))]


# --------------------------------------------------------------------------
# topology moves
# --------------------------------------------------------------------------


def _candidate_moves(x, edges, scale, step):
    """Yield (name, x, edges) candidates in a fixed order."""
    n = len(x)
    deg = _degrees(n, edges)
    lens = np.hypot(*(x[edges[:, 1]] - x[edges[:, 0]]).T)
    tiny = 0.1 * step * scale

    if np.any(lens < tiny):
        yield "delete_zero_edges", *_contract_short(x, edges, tiny)

    for k in np.argsort(lens, kind="stable"):
        i, j = map(int, edges[k])
        if lens[k] < step * scale and deg[i] == 3 and deg[j] == 3:
            keep, drop = min(i, j), max(i, j)
            yield "merge_degree3", *_contract(x, edges, keep, drop, 0.5 * (x[i] + x[j]))

    for v in range(n):
        if deg[v] < 4:
            continue
        nb = _neighbors(edges, v)
        ang = [math.atan2(*(x[w] - x[v])[::-1]) for w in nb]
        order = [nb[i] for i in np.argsort(ang, kind="stable")]
        k = len(order)
        for start in range(k):
            for size in range(2, k - 1):
                group = [order[(start + s) % k] for s in range(size)]
                yield "split_high_degree", *_split(x, edges, v, group, step * scale)

    for v in range(n):
        if deg[v] != 2:
            continue
        a, b = _neighbors(edges, v)
        u1, u2 = x[a] - x[v], x[b] - x[v]
        n1, n2 = np.hypot(*u1), np.hypot(*u2)
        if n1 == 0 or n2 == 0:
            continue
        ang = math.acos(max(-1.0, min(1.0, float(np.dot(u1, u2) / (n1 * n2)))))
        if ang < TWO_PI_3 - 1e-6:
            f = fermat_or_vertex(np.array([x[a], x[v], x[b]]))
            if np.hypot(*(f - x[v])) > 0:
                xs = np.vstack([x, f])
                s = len(x)
                es = edges.copy()
                es[(es[:, 0] == v) & (es[:, 1] == a)] = (s, a)
                es[(es[:, 0] == a) & (es[:, 1] == v)] = (a, s)
                es[(es[:, 0] == v) & (es[:, 1] == b)] = (s, b)
                es[(es[:, 0] == b) & (es[:, 1] == v)] = (b, s)
                es = np.vstack([es, [v, s]])
                yield "corner_to_tripod", xs, es


def _contract_short(x, edges, tiny):
    while True:
        lens = np.hypot(*(x[edges[:, 1]] - x[edges[:, 0]]).T)
        short = np.nonzero(lens < tiny)[0]
        if len(short) == 0:
            return x, edges
        i, j = sorted(map(int, edges[short[0]]))
        x, edges = _contract(x, edges, i, j, 0.5 * (x[i] + x[j]))


def _split(x, edges, v, group, offset):
    """Detach ``group`` of v's neighbours onto a new vertex placed toward them."""
    s = len(x)
    dirs = np.array([(x[w] - x[v]) / max(np.hypot(*(x[w] - x[v])), 1e-300) for w in group])
    d = dirs.sum(axis=0)
    nd = np.hypot(*d)
    d = d / nd if nd > 0 else dirs[0]
    xs = np.vstack([x, x[v] + offset * d])
    es = edges.copy()
    for w in group:
        es[(es[:, 0] == v) & (es[:, 1] == w)] = (s, w)
        es[(es[:, 0] == w) & (es[:, 1] == v)] = (w, s)
    return xs, np.vstack([es, [v, s]])


# --------------------------------------------------------------------------
# feasibility projection and repair
# --------------------------------------------------------------------------


def project_feasible(x, edges, m, r, tol, max_passes: int = 200):
    """Push the nearest tree point toward each uncovered sample by its deficit."""
    x = x.copy()
    for _ in range(max_passes):
        a, b = x[edges[:, 0]], x[edges[:, 1]]
        dist, seg, t = nearest_on_segments(m, a, b)
        over = dist - r
        bad = np.nonzero(over > 0.25 * tol)[0]
        if len(bad) == 0:
            break
        move = np.zeros_like(x)
        size = np.zeros(len(x))
        for y in bad:
            s, th = seg[y], t[y]
            q = a[s] + th * (b[s] - a[s])
            u = (m[y] - q) / dist[y]
            c = (over[y] + 0.25 * tol) / ((1 - th) ** 2 + th ** 2)
            for vtx, wgt in ((edges[s, 0], 1 - th), (edges[s, 1], th)):
                if wgt * c > size[vtx]:
                    size[vtx] = wgt * c
                    move[vtx] = wgt * c * u
        x = x + move
    return x


def local_angle_repair(g: SigmaGraph, tol: float = 1e-12) -> SigmaGraph:
    """Move every degree-3 vertex to the Fermat point of its three neighbour anchors.

    The anchor along an edge is the polyline point next to the vertex.  When
    the optimal junction is an anchor itself, the vertex is merged onto it.
    """
    x, edges = _from_graph(g)
    for vid in sorted(g.vertex_ids):
        v = g.row[vid]
        if v >= len(x):
            continue
        nb = _neighbors(edges, v)
        if len(nb) != 3 or len(set(nb)) != 3:
            continue
        tri = x[nb]
        before = tree_length(x, edges)
        f = fermat_or_vertex(tri)
        snapped = [k for k in range(3) if np.array_equal(f, tri[k])]
        x_new = x.copy()
        x_new[v] = f
        if snapped:
            keep = nb[snapped[0]]
            x_new, e_new = _contract(x_new, edges, keep, v)
        else:
            e_new = edges
        after = tree_length(x_new, e_new)
        if after > before + tol:
            raise AssertionError(f"angle repair increased length by {after - before:.3e}")
        if after <= before:
            x, edges = x_new, e_new
    return _simplify(x, edges, g.provenance)


def _simplify(x, edges, provenance):
    """Rebuild a graph whose vertices are the non-degree-2 points and polylines the chains between them."""
    n = len(x)
    deg = _degrees(n, edges)
    adj = [[] for _ in range(n)]
    for i, j in edges:
        adj[i].append(int(j))
        adj[j].append(int(i))
    keep = [v for v in range(n) if deg[v] != 2]
    if not keep:
        keep = [0]
    is_key = np.zeros(n, bool)
    is_key[keep] = True
    used = set()
    out_edges = []
    for v in keep:
        for w in adj[v]:
            if (min(v, w), max(v, w)) in used:
                continue
            chain = [v]
            prev, cur = v, w
            used.add((min(prev, cur), max(prev, cur)))
            while not is_key[cur]:
                chain.append(cur)
                nxt = adj[cur][0] if adj[cur][0] != prev else adj[cur][1]
                prev, cur = cur, nxt
                used.add((min(prev, cur), max(prev, cur)))
            chain.append(cur)
            out_edges.append((v, cur, x[chain]))
    ids = {v: k for k, v in enumerate(keep)}
    return SigmaGraph([(ids[v], x[v]) for v in keep],
                      [(k, ids[u], ids[w], poly) for k, (u, w, poly) in enumerate(out_edges)], provenance)


# --------------------------------------------------------------------------
# initial trees
# --------------------------------------------------------------------------


def random_tree(m: PointCloud, r: float, k: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Euclidean MST of ``k`` uniform points in the bounding box of M grown by r."""
    lo = m.points.min(axis=0) - r
    hi = m.points.max(axis=0) + r
    pts = lo + rng.random((k, 2)) * (hi - lo)
    mst = minimum_spanning_tree(squareform(pdist(pts))).tocoo()
    edges = np.column_stack([mst.row, mst.col]).astype(np.int64)
    return pts, _canonical_edges(edges)


def concentric_polygon(center, radius: float, n: int, gap_direction: float = 0.0) -> SigmaGraph:
    """Regular n-gon around ``center`` with the edge crossing ``gap_direction`` removed."""
    theta = gap_direction + 2.0 * math.pi * (np.arange(n) + 0.5) / n
    pts = np.column_stack([center[0] + radius * np.cos(theta), center[1] + radius * np.sin(theta)])
    return SigmaGraph.from_polyline(pts, provenance="concentric-polygon")


def _initial_state(m: PointCloud, cfg: OptimizerConfig, rng):
    if cfg.init == "random_tree":
        return random_tree(m, cfg.r, cfg.random_points, rng)
    if cfg.init == "trimmed_steiner":
        from .minlab import trimmed_tree

        return _from_graph(trimmed_tree(m, cfg.r))
    return _from_graph(cfg.init_graph)


# --------------------------------------------------------------------------
# driver
# --------------------------------------------------------------------------


def optimize(m: PointCloud, cfg: OptimizerConfig) -> OptimizerTrace:
    """Approximate a minimizer of length subject to every point of M lying within r."""
    rng = np.random.default_rng(cfg.seed)
    pts = np.ascontiguousarray(m.points)
    scale = max(point_set_diameter(pts), cfg.r)
    x, edges = _initial_state(m, cfg, rng)
    if len(edges) == 0:
        raise ValueError("initial tree has no edges")
    r = cfg.r

    lengths, energies, violations, weights, objectives, events, snaps = [], [], [], [], [], [], []

    def record(xv, w):
        if cfg.snapshot_every and len(lengths) % cfg.snapshot_every == 0:
            snaps.append((len(lengths), _simplify(xv.copy(), edges.copy(), "snapshot")))
        f, viol = _coverage(xv, edges, pts, r)
        lengths.append(tree_length(xv, edges))
        energies.append(f)
        violations.append(viol)
        weights.append(w)
        objectives.append(penalized_objective(xv, edges, pts, r, w)[0])

    budget = cfg.max_iters
    for w in cfg.penalty_schedule:
        while budget > 0:
            fun = lambda z: penalized_objective(z, edges, pts, r, w)  # noqa: E731
            res = minimize(fun, x.ravel(), jac=True, method="L-BFGS-B",
                           callback=lambda z: record(z.reshape(-1, 2), w),
                           options={"maxiter": min(PHASE_ITERS, budget), "gtol": 1e-12, "ftol": 1e-15})
            budget -= max(int(res.nit), 1)
            if res.fun <= fun(x.ravel())[0]:
                x = res.x.reshape(-1, 2).copy()
            moved = False
            if cfg.topology_moves_enabled and budget > 0:
                current = penalized_objective(x, edges, pts, r, w)[0]
                for name, xs, es in _candidate_moves(x, edges, scale, cfg.step_size):
                    val = penalized_objective(xs, es, pts, r, w)[0]
                    if val < current:
                        x, edges = xs, es
                        events.append({"iteration": len(lengths), "move": name,
                                       "objective_before": current, "objective_after": val})
                        moved = True
                        break
            if res.nit < PHASE_ITERS and not moved:
                break

    x = project_feasible(x, edges, pts, r, cfg.tol_feas)
    final = _simplify(x, edges, "optimizer")
    if not is_connected(final) or has_cycle(final):
        raise AssertionError("optimizer produced a non-tree")
    f, viol = _coverage(x, edges, pts, r)
    return OptimizerTrace(np.array(lengths), np.array(energies), np.array(violations), np.array(weights),
                          np.array(objectives), tuple(events), final, viol <= cfg.tol_feas, total_length(final), f, viol,
                          tuple(snaps))
