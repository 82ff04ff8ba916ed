"""Candidate sets as embedded planar graphs with polyline edges."""
from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .geometry import GeometryError, as_points, as_xy

ENDPOINT_MATCH_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Edge:
    id: int
    u: int
    v: int
    polyline: np.ndarray

    @property
    def length(self) -> float:
        d = np.diff(self.polyline, axis=0)
        return float(np.sum(np.hypot(d[:, 0], d[:, 1])))


class SigmaGraph:
    """Embedded graph: vertices with coordinates, edges as polylines.

    Instances are treated as immutable; builders return fresh graphs.
    """

    def __init__(self, vertices, edges=(), provenance: str = ""):
        ids = []
        coords = []
        for vid, p in vertices:
            ids.append(int(vid))
            coords.append(as_xy(p))
        if len(set(ids)) != len(ids):
            raise GeometryError("duplicate vertex id")
        self.vertex_ids: tuple[int, ...] = tuple(ids)
        self.coords = np.array(coords, dtype=np.float64).reshape(-1, 2)
        self.coords.flags.writeable = False
        self.row = {vid: i for i, vid in enumerate(ids)}
        self.provenance = provenance

        scale = max(1.0, float(np.abs(self.coords).max())) if len(ids) else 1.0
        built = []
        seen = set()
        for eid, u, v, poly in edges:
            eid, u, v = int(eid), int(u), int(v)
            if eid in seen:
                raise GeometryError(f"duplicate edge id {eid}")
            seen.add(eid)
            if u not in self.row or v not in self.row:
                raise GeometryError(f"edge {eid} references an unknown vertex")
            if poly is None:
                poly = [self.coords[self.row[u]], self.coords[self.row[v]]]
            poly = as_points(poly).copy()
            if poly.shape[0] < 2:
                raise GeometryError(f"edge {eid} polyline needs two points")
            tol = ENDPOINT_MATCH_TOL * scale
            if (np.abs(poly[0] - self.coords[self.row[u]]).max() > tol
                    or np.abs(poly[-1] - self.coords[self.row[v]]).max() > tol):
                raise GeometryError(f"edge {eid} polyline does not start/end at its vertices")
            poly.flags.writeable = False
            built.append(Edge(eid, u, v, poly))
        self.edges: tuple[Edge, ...] = tuple(built)

    # ------------------------------------------------------------------ builders

    @classmethod
    def from_polyline(cls, pts, closed: bool = False, provenance: str = "") -> "SigmaGraph":
        pts = as_points(pts)
        if closed:
            poly = np.vstack([pts, pts[:1]])
            return cls([(0, pts[0])], [(0, 0, 0, poly)], provenance)
        return cls([(0, pts[0]), (1, pts[-1])], [(0, 0, 1, pts)], provenance)

    @classmethod
    def from_segments(cls, segments: Iterable, provenance: str = "", tol: float = 1e-12) -> "SigmaGraph":
        """Build from straight segments, merging endpoints closer than ``tol``."""
        verts: list[np.ndarray] = []

        def vid(p):
            p = as_xy(p)
            for i, q in enumerate(verts):
                if abs(p[0] - q[0]) <= tol and abs(p[1] - q[1]) <= tol:
                    return i
            verts.append(p)
            return len(verts) - 1

        edges = []
        for k, (a, b) in enumerate(segments):
            i, j = vid(a), vid(b)
            edges.append((k, i, j, [verts[i], verts[j]]))
        return cls(list(enumerate(verts)), edges, provenance)

    @classmethod
    def from_arrays(cls, coords, pairs, provenance: str = "") -> "SigmaGraph":
        coords = as_points(coords)
        return cls(list(enumerate(coords)),
                   [(k, int(i), int(j), None) for k, (i, j) in enumerate(pairs)], provenance)

    @classmethod
    def point(cls, p, provenance: str = "") -> "SigmaGraph":
        return cls([(0, p)], [], provenance)

    # ------------------------------------------------------------------ queries

    @property
    def n_vertices(self) -> int:
        return len(self.vertex_ids)

    @cached_property
    def degree(self) -> dict[int, int]:
        deg = Counter({vid: 0 for vid in self.vertex_ids})
        for e in self.edges:
            deg[e.u] += 1
            deg[e.v] += 1
        return dict(deg)

    @cached_property
    def incident(self) -> dict[int, list[Edge]]:
        inc: dict[int, list[Edge]] = {vid: [] for vid in self.vertex_ids}
        for e in self.edges:
            inc[e.u].append(e)
            if e.v != e.u:
                inc[e.v].append(e)
        return inc

    @cached_property
    def _segments(self):
        if not self.edges:
            p = self.coords[:1]
            return p.copy(), p.copy(), np.zeros(1, dtype=np.int64)
        a = np.vstack([e.polyline[:-1] for e in self.edges])
        b = np.vstack([e.polyline[1:] for e in self.edges])
        owner = np.concatenate([np.full(len(e.polyline) - 1, k) for k, e in enumerate(self.edges)])
        return a, b, owner

    def segments(self):
        """All polyline pieces as ``(a, b, edge_index)`` arrays.

        A graph without edges yields one zero-length segment per first vertex,
        so distance queries still work on a single point.
        """
        if not self.edges and self.n_vertices > 1:
            p = self.coords
            return p.copy(), p.copy(), np.zeros(len(p), dtype=np.int64)
        return self._segments

    def all_points(self) -> np.ndarray:
        if not self.edges:
            return self.coords.copy()
        return np.vstack([self.coords] + [e.polyline for e in self.edges])

    def bbox(self):
        pts = self.all_points()
        return pts.min(axis=0), pts.max(axis=0)

    @cached_property
    def diameter(self) -> float:
        return point_set_diameter(self.all_points())

    def vertex(self, vid: int) -> np.ndarray:
        return self.coords[self.row[vid]]

    def transformed(self, fn) -> "SigmaGraph":
        """Apply ``fn`` (array (k,2) -> array (k,2)) to every coordinate."""
        return SigmaGraph(
            [(vid, fn(self.coords[i][None, :])[0]) for i, vid in enumerate(self.vertex_ids)],
            [(e.id, e.u, e.v, fn(e.polyline)) for e in self.edges],
            self.provenance,
        )

    def refined(self, max_step: float) -> "SigmaGraph":
        """Same set with polylines subdivided so that no piece exceeds ``max_step``."""
        return SigmaGraph(
            [(vid, self.coords[i]) for i, vid in enumerate(self.vertex_ids)],
            [(e.id, e.u, e.v, subdivide(e.polyline, max_step)) for e in self.edges],
            self.provenance,
        )

    # ------------------------------------------------------------------ json

    def to_dict(self) -> dict:
        return {
            "vertices": [{"id": vid, "x": float(p[0]), "y": float(p[1])}
                         for vid, p in zip(self.vertex_ids, self.coords)],
            "edges": [{"id": e.id, "u": e.u, "v": e.v,
                       "polyline": [[float(x), float(y)] for x, y in e.polyline]}
                      for e in self.edges],
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SigmaGraph":
        allowed = {"vertices", "edges", "provenance"}
        extra = set(d) - allowed
        if extra:
            raise ValueError(f"unknown SigmaGraph fields: {sorted(extra)}")
        verts = [(v["id"], (v["x"], v["y"])) for v in d["vertices"]]
        edges = [(e["id"], e["u"], e["v"], e.get("polyline")) for e in d.get("edges", [])]
        return cls(verts, edges, d.get("provenance", ""))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "SigmaGraph":
        return cls.from_dict(json.loads(text))

    def __repr__(self):
        return (f"SigmaGraph({self.n_vertices} vertices, {len(self.edges)} edges, "
                f"length={total_length(self):.6g})")


def subdivide(poly: np.ndarray, max_step: float) -> np.ndarray:
    out = [poly[:1]]
    for p, q in zip(poly[:-1], poly[1:]):
        n = max(1, int(math.ceil(math.hypot(*(q - p)) / max_step - 1e-12)))
        t = (np.arange(1, n + 1) / n)[:, None]
        pts = p + t * (q - p)
        pts[-1] = q
        out.append(pts)
    return np.vstack(out)


def point_set_diameter(pts: np.ndarray) -> float:
    pts = np.unique(np.asarray(pts, dtype=np.float64), axis=0)
    if len(pts) < 2:
        return 0.0
    if len(pts) > 3:
        from scipy.spatial import ConvexHull, QhullError

        try:
            pts = pts[ConvexHull(pts).vertices]
        except QhullError:
            pass  # collinear input: brute force below is still small enough
    best = 0.0
    for start in range(0, len(pts), 1024):
        d = pts[start:start + 1024, None, :] - pts[None, :, :]
        best = max(best, float(np.sqrt((d ** 2).sum(-1)).max()))
    return best


# ---------------------------------------------------------------------- ops


def total_length(g: SigmaGraph) -> float:
    """Sum of polyline chord lengths (the one-dimensional Hausdorff measure)."""
    return float(math.fsum(e.length for e in g.edges))


def _components(g: SigmaGraph):
    n = g.n_vertices
    if not g.edges:
        return n, np.arange(n)
    rows = [g.row[e.u] for e in g.edges]
    cols = [g.row[e.v] for e in g.edges]
    adj = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    return connected_components(adj, directed=False)


def is_connected(g: SigmaGraph) -> bool:
    if g.n_vertices == 0:
        return False
    return _components(g)[0] == 1


def has_cycle(g: SigmaGraph) -> bool:
    """True iff the vertex/edge multigraph has a cycle; self-loops are closed curves."""
    ncomp, _ = _components(g)
    return len(g.edges) - g.n_vertices + ncomp > 0


@dataclass(frozen=True)
class OrderReport:
    vertex: int
    ord: int
    ordball: int
    radius_used: float
    counts: tuple[int, ...]
    stabilized: bool


def circle_crossings(center, rho: float, a: np.ndarray, b: np.ndarray) -> int:
    """Number of points where the circle |x - center| = rho meets the pieces [a, b].

    Parameters are counted on the half-open interval [0, 1) so that a shared
    polyline vertex lying exactly on the circle is counted once.
    """
    c = as_xy(center)
    d = b - a
    w = a - c
    aa = np.einsum("ij,ij->i", d, d)
    bb = np.einsum("ij,ij->i", d, w)
    cc = np.einsum("ij,ij->i", w, w) - rho * rho
    ok = aa > 0
    disc = bb * bb - aa * cc
    count = 0
    for i in np.nonzero(ok & (disc >= 0))[0]:
        sq = math.sqrt(disc[i])
        roots = {(-bb[i] - sq) / aa[i], (-bb[i] + sq) / aa[i]}
        count += sum(1 for t in roots if 0.0 <= t < 1.0)
    return count


def local_feature_size(g: SigmaGraph, vid: int) -> float:
    """Distance from vertex ``vid`` to the nearest feature other than itself.

    Features are polyline pieces not touching the vertex and the far ends of
    the pieces that do.
    """
    p = g.vertex(vid)
    a, b, _ = g.segments()
    at_a = np.all(a == p, axis=1)
    at_b = np.all(b == p, axis=1)
    touches = at_a | at_b
    far = np.vstack([b[at_a & ~at_b], a[at_b & ~at_a]])
    best = float(np.hypot(*(far - p).T).min()) if len(far) else math.inf
    if np.all(touches):
        others = [g.coords[i] for i in range(g.n_vertices) if g.vertex_ids[i] != vid]
        if others:
            best = min(best, float(min(math.hypot(*(q - p)) for q in others)))
        return best
    from .kernels import nearest_on_segments_numpy

    d, _, _ = nearest_on_segments_numpy(p[None, :], a[~touches], b[~touches])
    return min(best, float(d[0]))


def ordball_at(g: SigmaGraph, v: int, radii: Sequence[float] | None = None) -> OrderReport:
    """Discrete order of ``g`` at vertex ``v``.

    ``ord`` is the combinatorial degree (a self-loop counts twice).  ``ordball``
    is the modal number of crossings of the circles ``|x - v| = rho`` with the
    graph over the radius ladder; the report flags whether the counts agreed.
    """
    if v not in g.row:
        raise KeyError(v)
    lfs = local_feature_size(g, v)
    if radii is None:
        if not math.isfinite(lfs):
            lfs = g.diameter if g.diameter > 0 else 1.0
        rho0 = 0.25 * lfs
        radii = [rho0, rho0 / 2, rho0 / 4, rho0 / 8]
    radii = [float(r) for r in radii]
    if any(r <= 0 for r in radii):
        raise ValueError("radii must be positive")
    if max(radii) >= 0.5 * lfs:
        raise ValueError(f"radius {max(radii)} leaves the local neighbourhood (feature size {lfs})")
    a, b, _ = g.segments()
    p = g.vertex(v)
    counts = tuple(circle_crossings(p, r, a, b) for r in radii)
    modal = Counter(counts).most_common()
    top = max(c for _, c in modal)
    ordball = min(k for k, c in modal if c == top)
    return OrderReport(v, g.degree[v], ordball, min(radii), counts, len(set(counts)) == 1)


def embedding_violations(g: SigmaGraph, tol: float | None = None) -> list[tuple[int, int]]:
    """Pairs of polyline pieces that touch or come within ``tol`` illegitimately.

    Pieces that share an endpoint (consecutive along a polyline, or meeting at a
    graph vertex) are allowed to touch there and are not reported.
    """
    import shapely

    a, b, _ = g.segments()
    if len(a) < 2:
        return []
    if tol is None:
        tol = 1e-9 * max(g.diameter, 1e-300)
    lines = shapely.linestrings(np.stack([a, b], axis=1))
    tree = shapely.STRtree(lines)
    left, right = tree.query(lines, predicate="dwithin", distance=tol)
    bad = []
    for i, j in zip(left, right):
        if i >= j:
            continue
        shared = [p for p in (a[i], b[i]) if np.array_equal(p, a[j]) or np.array_equal(p, b[j])]
        if shared:
            if len(shared) == 2:
                bad.append((int(i), int(j)))  # overlapping duplicate piece
                continue
            # touching at the shared endpoint is fine; check the far ends instead
            s = shared[0]
            fi = b[i] if np.array_equal(a[i], s) else a[i]
            fj = b[j] if np.array_equal(a[j], s) else a[j]
            ui, uj = fi - s, fj - s
            cos = float(np.dot(ui, uj) / (np.linalg.norm(ui) * np.linalg.norm(uj)))
            if cos > 1.0 - 1e-12:
                bad.append((int(i), int(j)))  # folded back onto itself
            continue
        bad.append((int(i), int(j)))
    return bad


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Finite sample of a graph: every vertex plus every polyline point.

    ``chains[k]`` lists the sample indices along edge ``k`` from ``u`` to ``v``
    (vertex samples included at both ends).
    """

    points: np.ndarray
    vertex_sample: dict
    sample_vertex: np.ndarray  # vertex id per sample, -1 for polyline interiors
    chains: tuple
    step: float

    def __len__(self):
        return len(self.points)


def sample_sigma(g: SigmaGraph, step: float | None = None) -> SampleSet:
    """Sample ``g`` at its polyline points, subdividing pieces longer than ``step``."""
    src = g.refined(step) if step else g
    pts = [src.coords]
    sample_vertex = [np.array(src.vertex_ids, dtype=np.int64)]
    vertex_sample = {vid: i for i, vid in enumerate(src.vertex_ids)}
    chains = []
    n = src.n_vertices
    for e in src.edges:
        inner = e.polyline[1:-1]
        idx = list(range(n, n + len(inner)))
        n += len(inner)
        pts.append(inner)
        sample_vertex.append(np.full(len(inner), -1, dtype=np.int64))
        chains.append(np.array([vertex_sample[e.u]] + idx + [vertex_sample[e.v]], dtype=np.int64))
    if step is None:
        a, b, _ = g.segments()
        seg = np.hypot(*(b - a).T)
        step = float(np.median(seg)) if len(seg) else 0.0
    return SampleSet(np.vstack(pts), vertex_sample, np.concatenate(sample_vertex),
                     tuple(chains), float(step))
