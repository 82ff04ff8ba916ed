"""Independent reference computations used only by the tests."""
from __future__ import annotations

import math

import numpy as np
from scipy.optimize import minimize


def weiszfeld_length(tri: np.ndarray, iters: int = 20000) -> np.ndarray:
    """Steiner length of many triangles (shape (k, 3, 2)) by Weiszfeld iteration.

    Vertices are also tried as candidates since the iteration cannot land on one.
    """
    x = tri.mean(axis=1)
    for _ in range(iters):
        d = np.linalg.norm(tri - x[:, None, :], axis=2)
        d = np.maximum(d, 1e-300)
        w = 1.0 / d
        x = (tri * w[:, :, None]).sum(axis=1) / w.sum(axis=1)[:, None]
    best = np.linalg.norm(tri - x[:, None, :], axis=2).sum(axis=1)
    for k in range(3):
        v = np.linalg.norm(tri - tri[:, k:k + 1, :], axis=2).sum(axis=1)
        best = np.minimum(best, v)
    return best


def _topologies(k):
    trees = [((0, k), (1, k), (2, k))]
    for leaf in range(3, k):
        s = k + leaf - 2
        trees = [t[:i] + t[i + 1:] + ((x, s), (s, y), (s, leaf)) for t in trees for i, (x, y) in enumerate(t)]
    return trees


def smt_length_convex(pts: np.ndarray) -> float:
    """Steiner minimal tree length: min over full topologies of a convex program.

    Steiner points may collapse onto terminals or each other, which covers every
    non-full tree as a degenerate full one.
    """
    pts = np.asarray(pts, dtype=float)
    n = len(pts)
    if n == 2:
        return float(np.linalg.norm(pts[0] - pts[1]))
    best = math.inf
    for topo in _topologies(n):
        topo = np.array(topo)

        def f(z):
            nodes = np.vstack([pts, z.reshape(-1, 2)])
            diff = nodes[topo[:, 0]] - nodes[topo[:, 1]]
            return np.sqrt((diff ** 2).sum(1) + 1e-30).sum()

        z0 = np.tile(pts.mean(0), n - 2) + 1e-3 * np.arange(2 * (n - 2))
        res = minimize(f, z0, method="BFGS", options={"gtol": 1e-12, "maxiter": 20000})
        z = res.x
        # polish with coordinate-wise geometric-median sweeps
        nodes = np.vstack([pts, z.reshape(-1, 2)])
        for _ in range(2000):
            for s in range(n, 2 * n - 2):
                nb = [b if a == s else a for a, b in topo if s in (a, b)]
                y = nodes[nb]
                x = nodes[s]
                for _ in range(5):
                    d = np.maximum(np.linalg.norm(y - x, axis=1), 1e-300)
                    x = (y / d[:, None]).sum(0) / (1 / d).sum()
                nodes[s] = x
        val = sum(np.linalg.norm(nodes[a] - nodes[b]) for a, b in topo)
        best = min(best, val)
    return best
