"""Deterministic SVG output for point clouds, candidate graphs and witness balls."""
from __future__ import annotations

from typing import Iterable

import numpy as np

from .energy import PointCloud
from .sigma import SigmaGraph

MARGIN = 0.10


def fmt(v: float) -> str:
    s = f"{float(v):.9g}"
    return "0" if s == "-0" else s


def _bbox(arrays: Iterable[np.ndarray]):
    pts = np.vstack([a.reshape(-1, 2) for a in arrays if np.size(a)])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = hi - lo
    pad = MARGIN * max(float(span.max()), 1e-12)
    return lo - pad, hi + pad


def render_svg(m: PointCloud | None, g: SigmaGraph | None, balls: Iterable = (), r: float | None = None,
               witnesses: Iterable = (), title: str = "") -> str:
    """SVG with M as dots, Sigma as strokes and one circle of radius ``r`` per ball centre.

    Straight edges become ``<line>``; longer polylines become one ``<path>``.
    ``witnesses`` may hold EnergeticWitness objects; their M points are drawn
    as balls when ``r`` is given.  The y axis points up.
    """
    m_pts = m.points if m is not None else np.zeros((0, 2))
    centers = [np.asarray(c, dtype=float) for c in balls]
    centers += [np.array([w.y[0], w.y[1]], dtype=float) for w in witnesses]
    if centers and r is None:
        raise ValueError("drawing balls needs a radius")
    # one ball per distinct centre, in first-seen order
    seen, uniq = set(), []
    for c in centers:
        key = (float(c[0]), float(c[1]))
        if key not in seen:
            seen.add(key)
            uniq.append(c)
    arrays = [m_pts]
    if g is not None:
        arrays.append(g.all_points())
    if uniq:
        arrays.extend([c - r for c in uniq] + [c + r for c in uniq])
    lo, hi = _bbox(arrays) if any(np.size(a) for a in arrays) else (np.zeros(2), np.ones(2))
    w, h = hi - lo
    scale = max(float(w), float(h))
    dot = fmt(0.004 * scale)
    stroke = fmt(0.003 * scale)

    def X(x):
        return fmt(x)

    def Y(y):
        return fmt(-y)

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="{fmt(lo[0])} {fmt(-hi[1])} {fmt(w)} {fmt(h)}">',
    ]
    if title:
        out.append(f"<title>{_escape(title)}</title>")
    if uniq:
        out.append(f'<g class="balls" fill="none" stroke="#88a" stroke-width="{stroke}">')
        out.extend(f'<circle class="ball" cx="{X(c[0])}" cy="{Y(c[1])}" r="{fmt(r)}"/>' for c in uniq)
        out.append("</g>")
    if g is not None:
        out.append(f'<g class="sigma" fill="none" stroke="#c22" stroke-width="{stroke}" stroke-linejoin="round">')
        for e in g.edges:
            p = e.polyline
            if len(p) == 2:
                out.append(f'<line x1="{X(p[0, 0])}" y1="{Y(p[0, 1])}" x2="{X(p[1, 0])}" y2="{Y(p[1, 1])}"/>')
            else:
                out.append(f'<path d="M {_path(p)}"/>')
        out.append("</g>")
    if len(m_pts):
        out.append('<g class="m" fill="#225">')
        out.extend(f'<circle class="m-point" cx="{X(x)}" cy="{Y(y)}" r="{dot}"/>' for x, y in m_pts)
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _path(p: np.ndarray) -> str:
    head = f"{fmt(p[0, 0])},{fmt(-p[0, 1])}"
    tail = " ".join(f"{fmt(x)},{fmt(-y)}" for x, y in p[1:])
    return f"{head} L {tail}"


def _escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
