"""Euclidean Steiner trees for small terminal sets, plus rose-of-winds certificates.

Exact trees for up to six terminals come from enumerating full topologies on
every terminal subset, solving each with equilateral-point (Melzak) merging,
and combining the resulting full components by dynamic programming over
subsets.  Points are handled as complex numbers internally.
"""
from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .geometry import TWO_PI_3, GeometryError, as_points, as_xy, vector_angle
from .sigma import SigmaGraph

MAX_EXACT_TERMINALS = 6
ANGLE_TOL = 1e-8
_OMEGA = (cmath.exp(1j * math.pi / 3), cmath.exp(-1j * math.pi / 3))


class SteinerError(ValueError):
    """Raised when a Steiner construction's hypotheses are violated."""


@dataclass(frozen=True, eq=False)
class SteinerTree:
    """A tree spanning ``terminals`` through extra ``steiner_points``.

    Node ``i`` is ``terminals[i]`` for ``i < n`` and ``steiner_points[i - n]``
    otherwise; ``edges`` are pairs of node indices.
    """

    terminals: np.ndarray
    steiner_points: np.ndarray
    edges: tuple
    length: float
    topology_id: str
    flags: tuple = ()

    @property
    def nodes(self) -> np.ndarray:
        return np.vstack([self.terminals, self.steiner_points.reshape(-1, 2)])

    @property
    def n_terminals(self) -> int:
        return len(self.terminals)

    def degrees(self) -> np.ndarray:
        deg = np.zeros(len(self.terminals) + len(self.steiner_points), dtype=int)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    @property
    def is_full(self) -> bool:
        return bool(np.all(self.degrees()[: self.n_terminals] == 1))

    def edge_length_sum(self) -> float:
        nodes = self.nodes
        return math.fsum(math.hypot(*(nodes[i] - nodes[j])) for i, j in self.edges)

    def full_components(self) -> list["SteinerTree"]:
        """Split at terminals of degree >= 2 into full Steiner trees."""
        n = self.n_terminals
        nodes = self.nodes
        adj: dict[int, list[int]] = {}
        for i, j in self.edges:
            adj.setdefault(i, []).append(j)
            adj.setdefault(j, []).append(i)
        parts = []
        seen_steiner: set[int] = set()
        for i, j in self.edges:
            if i < n and j < n:
                parts.append(([i, j], [], [(i, j)]))
        for s in range(n, len(nodes)):
            if s in seen_steiner:
                continue
            stack, group, terms, edges = [s], [], set(), set()
            seen_steiner.add(s)
            while stack:
                u = stack.pop()
                group.append(u)
                for w in adj.get(u, []):
                    edges.add((min(u, w), max(u, w)))
                    if w < n:
                        terms.add(w)
                    elif w not in seen_steiner:
                        seen_steiner.add(w)
                        stack.append(w)
            parts.append((sorted(terms), sorted(group), sorted(edges)))
        out = []
        for terms, group, edges in parts:
            remap = {t: k for k, t in enumerate(terms)}
            remap.update({s: len(terms) + k for k, s in enumerate(group)})
            sub_edges = tuple((remap[i], remap[j]) for i, j in edges)
            sub = SteinerTree(nodes[terms], nodes[group].reshape(-1, 2), sub_edges, 0.0, "")
            out.append(_finish(sub.terminals, sub.steiner_points, sub_edges, flags=self.flags))
        return out

    def to_sigma(self, provenance: str = "steiner") -> SigmaGraph:
        nodes = self.nodes
        return SigmaGraph(list(enumerate(nodes)),
                          [(k, i, j, None) for k, (i, j) in enumerate(self.edges)], provenance)

    def to_dict(self) -> dict:
        return {
            "terminals": self.terminals.tolist(),
            "steiner_points": self.steiner_points.reshape(-1, 2).tolist(),
            "edges": [list(e) for e in self.edges],
            "length": self.length,
            "topology_id": self.topology_id,
            "flags": list(self.flags),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SteinerTree":
        extra = set(d) - {"terminals", "steiner_points", "edges", "length", "topology_id", "flags"}
        if extra:
            raise ValueError(f"unknown SteinerTree fields: {sorted(extra)}")
        return cls(np.array(d["terminals"], dtype=float).reshape(-1, 2),
                   np.array(d["steiner_points"], dtype=float).reshape(-1, 2),
                   tuple(tuple(int(v) for v in e) for e in d["edges"]),
                   float(d["length"]), str(d["topology_id"]), tuple(d.get("flags", ())))


def _finish(terminals, steiner, edges, flags=()) -> SteinerTree:
    terminals = np.asarray(terminals, dtype=float).reshape(-1, 2)
    steiner = np.asarray(steiner, dtype=float).reshape(-1, 2)
    edges = tuple(sorted((min(i, j), max(i, j)) for i, j in edges))
    nodes = np.vstack([terminals, steiner])
    length = math.fsum(math.hypot(*(nodes[i] - nodes[j])) for i, j in edges)
    return SteinerTree(terminals, steiner, edges, length, _canonical_id(len(terminals), edges), tuple(flags))


def _canonical_id(n: int, edges) -> str:
    """Canonical string for the topology; terminal labels matter, Steiner labels do not."""
    adj: dict[int, list[int]] = {}
    for i, j in edges:
        adj.setdefault(i, []).append(j)
        adj.setdefault(j, []).append(i)
    if not adj:
        return "(0)"

    def enc(u, parent):
        kids = sorted(enc(w, u) for w in adj[u] if w != parent)
        label = str(u) if u < n else "s"
        return label if not kids else f"{label}({','.join(kids)})"

    return enc(0, -1)


# --------------------------------------------------------------------------
# three points
# --------------------------------------------------------------------------


def _distinct(pts: np.ndarray):
    for i, j in itertools.combinations(range(len(pts)), 2):
        if pts[i][0] == pts[j][0] and pts[i][1] == pts[j][1]:
            raise GeometryError(f"duplicate terminals {i} and {j}")


def _triangle_angles(p: np.ndarray) -> list[float]:
    return [vector_angle(p[(k + 1) % 3] - p[k], p[(k + 2) % 3] - p[k]) for k in range(3)]


def fermat_point(a: complex, b: complex, c: complex) -> complex:
    """Point seeing every side at 2pi/3 (all triangle angles must be < 2pi/3).

    The equilateral point ``e`` is erected on the longest side, away from the
    opposite vertex; the answer is the second meeting point of line ``(opp, e)``
    with the circle through the side's ends and ``e``.
    """
    tri = [a, b, c]
    k = max(range(3), key=lambda i: abs(tri[(i + 1) % 3] - tri[(i + 2) % 3]))
    opp, p, q = tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]
    e1 = p + (q - p) * _OMEGA[0]
    e2 = p + (q - p) * _OMEGA[1]
    e = e1 if abs(e1 - opp) > abs(e2 - opp) else e2
    centre = (p + q + e) / 3.0
    d = opp - e
    t = -2.0 * ((e - centre).conjugate() * d).real / (abs(d) ** 2)
    return e + t * d


def steiner_3(a, b, c) -> SteinerTree:
    """Steiner minimal tree of three distinct points."""
    pts = np.array([as_xy(a), as_xy(b), as_xy(c)])
    _distinct(pts)
    ang = _triangle_angles(pts)
    k = int(np.argmax(ang))
    if ang[k] >= TWO_PI_3:
        return _finish(pts, np.zeros((0, 2)), [(k, (k + 1) % 3), (k, (k + 2) % 3)])
    z = [complex(*p) for p in pts]
    f = fermat_point(*z)
    return _finish(pts, [[f.real, f.imag]], [(0, 3), (1, 3), (2, 3)])


def fermat_or_vertex(p: np.ndarray) -> np.ndarray:
    """Minimiser of the summed distance to the three points ``p`` (rows)."""
    ang = _triangle_angles(p)
    k = int(np.argmax(ang))
    if ang[k] >= TWO_PI_3:
        return p[k].copy()
    f = fermat_point(*(complex(*q) for q in p))
    return np.array([f.real, f.imag])


# --------------------------------------------------------------------------
# full topologies and Melzak merging
# --------------------------------------------------------------------------


@lru_cache(maxsize=None)
def full_topologies(k: int) -> tuple:
    """All full topologies on leaves ``0..k-1``; Steiner nodes are ``k..2k-3``."""
    if k < 3:
        raise ValueError("full topologies need at least three leaves")
    trees = [((0, k), (1, k), (2, k))]
    for leaf in range(3, k):
        s = k + leaf - 2
        grown = []
        for t in trees:
            for idx, (x, y) in enumerate(t):
                rest = t[:idx] + t[idx + 1:]
                grown.append(rest + ((x, s), (s, y), (s, leaf)))
        trees = grown
    return tuple(trees)


def _melzak(leaves: list[complex], topo, signs) -> list[complex] | None:
    """Steiner point positions for one topology and equilateral side pattern."""
    k = len(leaves)
    adj: dict[int, list[int]] = {}
    for x, y in topo:
        adj.setdefault(x, []).append(y)
        adj.setdefault(y, []).append(x)
    parent = {0: -1}
    order = []
    stack = [0]
    while stack:
        u = stack.pop()
        order.append(u)
        for w in sorted(adj[u]):
            if w not in parent:
                parent[w] = u
                stack.append(w)
    children = {u: sorted(w for w in adj[u] if w != parent[u]) for u in order}
    virt: dict[int, complex] = {i: leaves[i] for i in range(k)}
    centre: dict[int, complex] = {}
    steiner_post = [u for u in reversed(order) if u >= k]
    for idx, s in enumerate(steiner_post):
        c1, c2 = children[s]
        p, q = virt[c1], virt[c2]
        virt[s] = p + (q - p) * _OMEGA[signs[idx]]
        centre[s] = (p + q + virt[s]) / 3.0
    pos: dict[int, complex] = {i: leaves[i] for i in range(k)}
    for s in order:
        if s < k:
            continue
        e, q = virt[s], pos[parent[s]]
        d = q - e
        dd = abs(d) ** 2
        if dd == 0.0:
            return None
        t = -2.0 * ((e - centre[s]).conjugate() * d).real / dd
        if not (0.0 < t < 1.0):
            return None
        pos[s] = e + t * d
    return [pos[s] for s in range(k, 2 * k - 2)]


def _steiner_angle_error(nodes: np.ndarray, edges, n_terminals: int) -> float:
    adj: dict[int, list[int]] = {}
    for i, j in edges:
        adj.setdefault(i, []).append(j)
        adj.setdefault(j, []).append(i)
    worst = 0.0
    for s in range(n_terminals, len(nodes)):
        nb = adj.get(s, [])
        if len(nb) != 3:
            return math.inf
        for u, w in itertools.combinations(nb, 2):
            du, dw = nodes[u] - nodes[s], nodes[w] - nodes[s]
            if not (np.any(du) and np.any(dw)):
                return math.inf
            worst = max(worst, abs(vector_angle(du, dw) - TWO_PI_3))
    return worst


def _relax_topology(pts: np.ndarray, topo, start: np.ndarray, iters: int = 200) -> np.ndarray:
    """Coordinate descent: move each Steiner point to the Fermat point of its neighbours."""
    k = len(pts)
    nodes = np.vstack([pts, start])
    adj: dict[int, list[int]] = {}
    for x, y in topo:
        adj.setdefault(x, []).append(y)
        adj.setdefault(y, []).append(x)
    prev = math.inf
    for _ in range(iters):
        for s in range(k, len(nodes)):
            nodes[s] = fermat_or_vertex(nodes[adj[s]])
        length = sum(math.hypot(*(nodes[x] - nodes[y])) for x, y in topo)
        if prev - length <= 1e-12 * max(1.0, length):
            break
        prev = length
    return nodes[k:]


def full_steiner_tree(pts, topo, min_edge: float) -> tuple[SteinerTree | None, bool]:
    """Solve one full topology; returns ``(tree or None, used_fallback)``."""
    pts = as_points(pts)
    k = len(pts)
    leaves = [complex(*p) for p in pts]
    near: np.ndarray | None = None
    for signs in itertools.product((0, 1), repeat=k - 2):
        sp = _melzak(leaves, topo, signs)
        if sp is None:
            continue
        steiner = np.array([[z.real, z.imag] for z in sp])
        nodes = np.vstack([pts, steiner])
        err = _steiner_angle_error(nodes, topo, k)
        short = min(math.hypot(*(nodes[x] - nodes[y])) for x, y in topo)
        if short <= min_edge:
            continue
        if err <= ANGLE_TOL:
            return _finish(pts, steiner, topo), False
        if err < 1e-4 and near is None:
            near = steiner
    if near is not None:
        steiner = _relax_topology(pts, topo, near)
        nodes = np.vstack([pts, steiner])
        short = min(math.hypot(*(nodes[x] - nodes[y])) for x, y in topo)
        if short > min_edge and _steiner_angle_error(nodes, topo, k) <= ANGLE_TOL:
            return _finish(pts, steiner, topo, flags=("numeric-fallback",)), True
    return None, False


def _better(a, b, tol: float) -> bool:
    """Strictly better (length, id) pair; lengths within ``tol`` tie on id."""
    if b is None:
        return True
    if abs(a[0] - b[0]) <= tol:
        return a[1] < b[1]
    return a[0] < b[0]


def steiner_exact(terminals) -> SteinerTree:
    """Steiner minimal tree for 2..6 distinct terminals."""
    pts = as_points(terminals)
    n = len(pts)
    if not 2 <= n <= MAX_EXACT_TERMINALS:
        raise SteinerError(f"exact solver supports 2..{MAX_EXACT_TERMINALS} terminals, got {n}")
    _distinct(pts)
    if n == 2:
        return _finish(pts, np.zeros((0, 2)), [(0, 1)])
    scale = float(np.max(np.ptp(pts, axis=0)))
    min_edge = 1e-9 * scale
    tie = 1e-12 * scale * n

    # best full component per subset (bitmask); each entry (length, id, parts)
    full: dict[int, tuple] = {}
    flagged = False
    for size in range(2, n + 1):
        for subset in itertools.combinations(range(n), size):
            mask = sum(1 << i for i in subset)
            sub = pts[list(subset)]
            if size == 2:
                tree = _finish(sub, np.zeros((0, 2)), [(0, 1)])
                full[mask] = (tree.length, _global_id(tree, subset), [(subset, tree)])
                continue
            best = None
            for topo in full_topologies(size):
                tree, fb = full_steiner_tree(sub, topo, min_edge)
                if tree is None:
                    continue
                flagged |= fb
                cand = (tree.length, _global_id(tree, subset), [(subset, tree)])
                if _better(cand, best, tie):
                    best = cand
            if best is not None:
                full[mask] = best

    # combine full components: a non-full tree splits at a terminal of degree >= 2
    best_for: dict[int, tuple] = {}
    for mask in sorted(range(1, 1 << n), key=lambda m: bin(m).count("1")):
        members = [i for i in range(n) if mask >> i & 1]
        if len(members) < 2:
            continue
        best = full.get(mask)
        for v in members:
            rest = [i for i in members if i != v]
            # split rest into A (containing rest[0]) and nonempty B
            for r in range(0, len(rest) - 1):
                for extra in itertools.combinations(rest[1:], r):
                    a_mask = (1 << v) | (1 << rest[0]) | sum(1 << i for i in extra)
                    b_mask = (mask & ~a_mask) | (1 << v)
                    left, right = best_for[a_mask], best_for[b_mask]
                    ids = sorted(left[1].split("+") + right[1].split("+"))
                    cand = (left[0] + right[0], "+".join(ids), left[2] + right[2])
                    if _better(cand, best, tie):
                        best = cand
        best_for[mask] = best

    length, topo_id, parts = best_for[(1 << n) - 1]
    steiner, edges = [], []
    for subset, tree in parts:
        k = len(subset)
        remap = {i: subset[i] for i in range(k)}
        for s in range(len(tree.steiner_points)):
            remap[k + s] = n + len(steiner)
            steiner.append(tree.steiner_points[s])
        edges.extend((remap[i], remap[j]) for i, j in tree.edges)
    out = _finish(pts, np.array(steiner).reshape(-1, 2), edges,
                  flags=("numeric-fallback",) if flagged else ())
    return SteinerTree(out.terminals, out.steiner_points, out.edges, out.length, topo_id, out.flags)


def _global_id(tree: SteinerTree, subset) -> str:
    n = len(subset)
    edges = [(subset[i] if i < n else 100 + i, subset[j] if j < n else 100 + j) for i, j in tree.edges]
    adj: dict[int, list[int]] = {}
    for i, j in edges:
        adj.setdefault(i, []).append(j)
        adj.setdefault(j, []).append(i)

    def enc(u, parent):
        kids = sorted(enc(w, u) for w in adj[u] if w != parent)
        label = str(u) if u < 100 else "s"
        return label if not kids else f"{label}({','.join(kids)})"

    return enc(min(subset), -1)


# --------------------------------------------------------------------------
# isoceles defect constant
# --------------------------------------------------------------------------


def isoceles_triangle(apex: float, eps: float = 1.0) -> np.ndarray:
    """Points A, B, C with |AB| = |BC| = eps and angle ABC = ``apex``."""
    return np.array([[eps, 0.0], [0.0, 0.0], [eps * math.cos(apex), eps * math.sin(apex)]])


def angles4_d(alpha: float, beta: float | None = None, eps: float = 1.0) -> float:
    """Defect constant d with 2*eps - |St(A, B, C)| = d * eps.

    ``alpha`` and ``beta`` are the two base angles of the isoceles triangle with
    |AB| = |BC| = eps; they must agree.  All angles must be below 2pi/3.
    """
    beta = alpha if beta is None else beta
    if not math.isclose(alpha, beta, rel_tol=0.0, abs_tol=1e-12):
        raise SteinerError("isoceles shape requires equal base angles")
    return apex_d(math.pi - 2.0 * alpha, eps)


def apex_d(apex: float, eps: float = 1.0) -> float:
    base = 0.5 * (math.pi - apex)
    if not (0.0 < apex < TWO_PI_3 and base < TWO_PI_3):
        raise SteinerError("every triangle angle must be in (0, 2pi/3)")
    tree = steiner_3(*isoceles_triangle(apex, eps))
    return (2.0 * eps - tree.length) / eps


# --------------------------------------------------------------------------
# rose of winds and the forest/line inequality
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class RoseOfWinds:
    """Six rays at ``base_angle + k*pi/3`` with weights obeying the neighbour-sum rule."""

    base_angle: float
    weights: tuple

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        if len(w) != 6:
            raise ValueError("a rose of winds has six weights")
        object.__setattr__(self, "weights", w)
        scale = max(1.0, max(abs(x) for x in w))
        for k in range(6):
            if abs(w[k] - (w[k - 1] + w[(k + 1) % 6])) > 1e-12 * scale:
                raise ValueError(f"weight {k} is not the sum of its neighbours")

    def opposite_sums(self) -> tuple:
        return tuple(self.weights[k] + self.weights[k + 3] for k in range(3))

    def ray_index(self, direction, tol_angle: float) -> int:
        ang = math.atan2(direction[1], direction[0]) - self.base_angle
        k = round(ang / (math.pi / 3.0))
        if abs(ang - k * math.pi / 3.0) > tol_angle:
            raise SteinerError(f"direction at {math.degrees(ang):.6f} deg off every rose ray")
        return int(k) % 6

    @classmethod
    def aligned_with(cls, tree: SteinerTree, weights) -> "RoseOfWinds":
        i, j = tree.edges[0]
        d = tree.nodes[j] - tree.nodes[i]
        return cls(math.atan2(d[1], d[0]) % (math.pi / 3.0), weights)


def assign_rose_weights(tree: SteinerTree, rose: RoseOfWinds, tol_angle: float = 1e-6) -> float:
    """Sum over terminals of the weight of the ray co-directed with the terminal edge."""
    if not tree.is_full:
        raise SteinerError("rose weights need a full Steiner tree")
    nodes = tree.nodes
    n = tree.n_terminals
    for i, j in tree.edges:
        rose.ray_index(nodes[j] - nodes[i], tol_angle)
    total = []
    for i, j in tree.edges:
        for term, other in ((i, j), (j, i)):
            if term < n:
                total.append(rose.weights[rose.ray_index(nodes[term] - nodes[other], tol_angle)])
    return math.fsum(total)


@dataclass(frozen=True)
class ForestLineReport:
    on_line: int
    off_line: int
    holds: bool


def check_forest_line_inequality(forest, line, tol: float | None = None) -> ForestLineReport:
    """Count component endpoints on/off ``line`` and test on <= 2 * off.

    Every component must be a full Steiner tree; a terminal of degree 2 can
    leave both leaves on the line with nothing off it.  Components are counted
    separately, so endpoints shared by two components contribute once per
    component.
    """
    if not all(tree.is_full for tree in forest):
        raise SteinerError("the inequality needs a full Steiner forest")
    p, q = as_xy(line[0]), as_xy(line[1])
    d = q - p
    if not np.any(d):
        raise GeometryError("line needs two distinct points")
    normal = np.array([-d[1], d[0]]) / math.hypot(*d)
    on = off = 0
    for tree in forest:
        nodes = tree.nodes
        scale = max(1.0, float(np.abs(nodes).max()))
        eps = 1e-9 * scale if tol is None else tol
        dist = np.abs((nodes - p) @ normal)
        if np.all(dist <= eps):
            raise SteinerError("a component lies entirely on the line")
        deg = tree.degrees()
        leaves = np.nonzero(deg == 1)[0]
        hit = dist[leaves] <= eps
        on += int(hit.sum())
        off += int((~hit).sum())
    return ForestLineReport(on, off, on <= 2 * off)
