"""Hot numeric kernels: point-to-polyline distances and ball-clipped lengths.

Each kernel has a numba implementation and a numpy implementation with the
same arithmetic, so both backends return identical results.  The dispatching
functions at the bottom pick numba unless ``MAXDIST_DISABLE_NUMBA`` is set.
"""
from __future__ import annotations

import math

import numpy as np

from ._jit import USING_NUMBA, njit, prange

BRUTE_FORCE_MAX_SEGMENTS = 64
MAX_CELLS_PER_AXIS = 1024

# --------------------------------------------------------------------------
# numpy reference implementations
# --------------------------------------------------------------------------


def nearest_on_segments_numpy(points, seg_a, seg_b, chunk=2048):
    """Distance from each point to the nearest of the segments ``[a_i, b_i]``.

    Returns ``(dist, seg_index, t)`` where ``t`` is the foot parameter on the
    winning segment.  Ties go to the lowest segment index.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    a = np.ascontiguousarray(seg_a, dtype=np.float64)
    b = np.ascontiguousarray(seg_b, dtype=np.float64)
    m = points.shape[0]
    dist = np.empty(m)
    idx = np.empty(m, dtype=np.int64)
    tpar = np.empty(m)
    dx = b[:, 0] - a[:, 0]
    dy = b[:, 1] - a[:, 1]
    l2 = dx * dx + dy * dy
    safe = np.where(l2 > 0.0, l2, 1.0)
    for start in range(0, m, chunk):
        p = points[start:start + chunk]
        wx = p[:, 0:1] - a[:, 0]
        wy = p[:, 1:2] - a[:, 1]
        t = (wx * dx + wy * dy) / safe
        t = np.where(l2 > 0.0, np.minimum(np.maximum(t, 0.0), 1.0), 0.0)
        qx = a[:, 0] + t * dx
        qy = a[:, 1] + t * dy
        ex = p[:, 0:1] - qx
        ey = p[:, 1:2] - qy
        d2 = ex * ex + ey * ey
        j = np.argmin(d2, axis=1)
        rows = np.arange(p.shape[0])
        dist[start:start + chunk] = np.sqrt(d2[rows, j])
        idx[start:start + chunk] = j
        tpar[start:start + chunk] = t[rows, j]
    return dist, idx, tpar


def ball_lengths_numpy(centers, seg_a, seg_b, radii):
    """Length of the segment union inside each open ball; shape (centers, radii)."""
    centers = np.asarray(centers, dtype=np.float64)
    a = np.asarray(seg_a, dtype=np.float64)
    b = np.asarray(seg_b, dtype=np.float64)
    radii = np.asarray(radii, dtype=np.float64)
    d = b - a
    aa = d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1]
    seg_len = np.sqrt(aa)
    ok = aa > 0.0
    safe = np.where(ok, aa, 1.0)
    out = np.zeros((centers.shape[0], radii.shape[0]))
    for i in range(centers.shape[0]):
        wx = a[:, 0] - centers[i, 0]
        wy = a[:, 1] - centers[i, 1]
        bb = d[:, 0] * wx + d[:, 1] * wy
        cc = wx * wx + wy * wy
        for k in range(radii.shape[0]):
            disc = bb * bb - aa * (cc - radii[k] * radii[k])
            sq = np.sqrt(np.maximum(disc, 0.0))
            t1 = np.minimum(np.maximum((-bb - sq) / safe, 0.0), 1.0)
            t2 = np.minimum(np.maximum((-bb + sq) / safe, 0.0), 1.0)
            inside = ok & (disc > 0.0)
            out[i, k] = np.sum(np.where(inside, (t2 - t1) * seg_len, 0.0))
    return out


# --------------------------------------------------------------------------
# numba implementations
# --------------------------------------------------------------------------


@njit
def _seg_d2(px, py, ax, ay, bx, by):
    dx = bx - ax
    dy = by - ay
    l2 = dx * dx + dy * dy
    if l2 > 0.0:
        t = ((px - ax) * dx + (py - ay) * dy) / l2
        if t < 0.0:
            t = 0.0
        elif t > 1.0:
            t = 1.0
    else:
        t = 0.0
    qx = ax + t * dx
    qy = ay + t * dy
    ex = px - qx
    ey = py - qy
    return ex * ex + ey * ey, t


@njit(parallel=True)
def _nearest_brute_nb(points, a, b, dist, idx, tpar):
    m = points.shape[0]
    s = a.shape[0]
    for i in prange(m):
        best = np.inf
        bj = 0
        bt = 0.0
        for j in range(s):
            d2, t = _seg_d2(points[i, 0], points[i, 1], a[j, 0], a[j, 1], b[j, 0], b[j, 1])
            if d2 < best:
                best = d2
                bj = j
                bt = t
        dist[i] = np.sqrt(best)
        idx[i] = bj
        tpar[i] = bt


@njit
def _build_grid_nb(a, b, x0, y0, h, nx, ny):
    s = a.shape[0]
    counts = np.zeros(nx * ny + 1, dtype=np.int64)
    lo = np.empty((s, 2), dtype=np.int64)
    hi = np.empty((s, 2), dtype=np.int64)
    for j in range(s):
        cx0 = int((min(a[j, 0], b[j, 0]) - x0) / h)
        cx1 = int((max(a[j, 0], b[j, 0]) - x0) / h)
        cy0 = int((min(a[j, 1], b[j, 1]) - y0) / h)
        cy1 = int((max(a[j, 1], b[j, 1]) - y0) / h)
        cx0 = min(max(cx0, 0), nx - 1)
        cx1 = min(max(cx1, 0), nx - 1)
        cy0 = min(max(cy0, 0), ny - 1)
        cy1 = min(max(cy1, 0), ny - 1)
        lo[j, 0] = cx0
        lo[j, 1] = cy0
        hi[j, 0] = cx1
        hi[j, 1] = cy1
        for cx in range(cx0, cx1 + 1):
            for cy in range(cy0, cy1 + 1):
                counts[cy * nx + cx + 1] += 1
    for c in range(nx * ny):
        counts[c + 1] += counts[c]
    items = np.empty(counts[nx * ny], dtype=np.int64)
    fill = counts[:-1].copy()
    for j in range(s):
        for cx in range(lo[j, 0], hi[j, 0] + 1):
            for cy in range(lo[j, 1], hi[j, 1] + 1):
                c = cy * nx + cx
                items[fill[c]] = j
                fill[c] += 1
    return counts, items


@njit(parallel=True)
def _nearest_grid_nb(points, a, b, x0, y0, h, nx, ny, start, items, dist, idx, tpar):
    m = points.shape[0]
    for i in prange(m):
        px = points[i, 0]
        py = points[i, 1]
        cx = min(max(int(np.floor((px - x0) / h)), 0), nx - 1)
        cy = min(max(int(np.floor((py - y0) / h)), 0), ny - 1)
        best = np.inf
        bj = -1
        bt = 0.0
        k = 0
        while True:
            for gx in range(cx - k, cx + k + 1):
                if gx < 0 or gx >= nx:
                    continue
                for gy in range(cy - k, cy + k + 1):
                    if gy < 0 or gy >= ny:
                        continue
                    if abs(gx - cx) != k and abs(gy - cy) != k:
                        continue
                    c = gy * nx + gx
                    for q in range(start[c], start[c + 1]):
                        j = items[q]
                        d2, t = _seg_d2(px, py, a[j, 0], a[j, 1], b[j, 0], b[j, 1])
                        if d2 < best or (d2 == best and j < bj):
                            best = d2
                            bj = j
                            bt = t
            # lower bound on the distance to any cell outside the searched block
            lb = np.inf
            full = True
            if cx - k > 0:
                full = False
                lb = min(lb, max(0.0, px - (x0 + (cx - k) * h)))
            if cx + k < nx - 1:
                full = False
                lb = min(lb, max(0.0, x0 + (cx + k + 1) * h - px))
            if cy - k > 0:
                full = False
                lb = min(lb, max(0.0, py - (y0 + (cy - k) * h)))
            if cy + k < ny - 1:
                full = False
                lb = min(lb, max(0.0, y0 + (cy + k + 1) * h - py))
            if full or (bj >= 0 and best < lb * lb):
                break
            k += 1
        dist[i] = np.sqrt(best)
        idx[i] = bj
        tpar[i] = bt


@njit(parallel=True)
def _ball_lengths_nb(centers, a, b, radii, out):
    nc = centers.shape[0]
    s = a.shape[0]
    nr = radii.shape[0]
    for i in prange(nc):
        cx = centers[i, 0]
        cy = centers[i, 1]
        for j in range(s):
            dx = b[j, 0] - a[j, 0]
            dy = b[j, 1] - a[j, 1]
            aa = dx * dx + dy * dy
            if aa <= 0.0:
                continue
            seg_len = np.sqrt(aa)
            wx = a[j, 0] - cx
            wy = a[j, 1] - cy
            bb = dx * wx + dy * wy
            cc = wx * wx + wy * wy
            for k in range(nr):
                disc = bb * bb - aa * (cc - radii[k] * radii[k])
                if disc <= 0.0:
                    continue
                sq = np.sqrt(disc)
                t1 = min(max((-bb - sq) / aa, 0.0), 1.0)
                t2 = min(max((-bb + sq) / aa, 0.0), 1.0)
                out[i, k] += (t2 - t1) * seg_len


def _grid_params(points, a, b):
    seg_len = np.hypot(b[:, 0] - a[:, 0], b[:, 1] - a[:, 1])
    lo = np.minimum(a.min(axis=0), b.min(axis=0))
    hi = np.maximum(a.max(axis=0), b.max(axis=0))
    extent = float(max(hi[0] - lo[0], hi[1] - lo[1], 1e-300))
    # median length suits queries near the curve; extent/sqrt(#segments) bounds
    # the number of empty rings walked by queries far from it
    h = float(np.median(seg_len))
    h = max(h, extent / math.sqrt(len(seg_len)), extent / MAX_CELLS_PER_AXIS, 1e-300)
    nx = int((hi[0] - lo[0]) / h) + 1
    ny = int((hi[1] - lo[1]) / h) + 1
    return float(lo[0]), float(lo[1]), h, nx, ny


def nearest_on_segments_numba(points, seg_a, seg_b):
    points = np.ascontiguousarray(points, dtype=np.float64)
    a = np.ascontiguousarray(seg_a, dtype=np.float64)
    b = np.ascontiguousarray(seg_b, dtype=np.float64)
    m = points.shape[0]
    dist = np.empty(m)
    idx = np.empty(m, dtype=np.int64)
    tpar = np.empty(m)
    if a.shape[0] <= BRUTE_FORCE_MAX_SEGMENTS:
        _nearest_brute_nb(points, a, b, dist, idx, tpar)
    else:
        x0, y0, h, nx, ny = _grid_params(points, a, b)
        start, items = _build_grid_nb(a, b, x0, y0, h, nx, ny)
        _nearest_grid_nb(points, a, b, x0, y0, h, nx, ny, start, items, dist, idx, tpar)
    return dist, idx, tpar


def ball_lengths_numba(centers, seg_a, seg_b, radii):
    centers = np.ascontiguousarray(centers, dtype=np.float64)
    radii = np.ascontiguousarray(radii, dtype=np.float64)
    out = np.zeros((centers.shape[0], radii.shape[0]))
    _ball_lengths_nb(centers, np.ascontiguousarray(seg_a, dtype=np.float64),
                     np.ascontiguousarray(seg_b, dtype=np.float64), radii, out)
    return out


# --------------------------------------------------------------------------
# dispatch
# --------------------------------------------------------------------------

BACKEND = "numba" if USING_NUMBA else "numpy"


def nearest_on_segments(points, seg_a, seg_b):
    """Nearest-segment query; see :func:`nearest_on_segments_numpy`."""
    if np.shape(seg_a)[0] == 0:
        raise ValueError("no segments to measure against")
    if USING_NUMBA:
        return nearest_on_segments_numba(points, seg_a, seg_b)
    return nearest_on_segments_numpy(points, seg_a, seg_b)


def ball_lengths(centers, seg_a, seg_b, radii):
    if USING_NUMBA:
        return ball_lengths_numba(centers, seg_a, seg_b, radii)
    return ball_lengths_numpy(centers, seg_a, seg_b, radii)
