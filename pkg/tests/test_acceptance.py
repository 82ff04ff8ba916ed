"""End-to-end acceptance checks, one test per criterion.

Each test records a one-line PASS/FAIL summary that the terminal summary
prints at the end of the run.  Run alone with ``pytest tests/test_acceptance.py``.
"""
import json
import math
import time

import numpy as np
import pytest

from maxdist.cli import RunConfig
from maxdist.energy import PointCloud, energy

from maxdist.minlab import (
    CERTIFIED,
    criterion_check,
    horseshoe,
    negative_fixtures,
    positive_fixtures,
    trimmed_tree,
)
from maxdist.optimizer import (
    OptimizerConfig,
    OptimizerTrace,
    concentric_polygon,
    optimize,
    penalized_objective,
    random_tree,
)
from maxdist.sigma import SigmaGraph, point_set_diameter, total_length
from maxdist.steiner import (
    RoseOfWinds,
    SteinerError,
    SteinerTree,
    apex_d,
    assign_rose_weights,
    check_forest_line_inequality,
    steiner_3,
    steiner_exact,
)
from maxdist.svg import render_svg
from maxdist.validator import validate
from oracles import weiszfeld_length

RESULTS = {}
HORSESHOE_REFERENCE = 23.98473
PATTERNS = [(1, 2, 1, -1, -2, -1), (1, 1, 0, -1, -1, 0)]


def record(n, ok, detail, elapsed, limit=None):
    budget = f" (limit {limit:g} s)" if limit else ""
    RESULTS[n] = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}  [{elapsed:.2f} s{budget}]"
    print(RESULTS[n])
    assert ok, RESULTS[n]


def random_triangles(count, seed):
    return np.random.default_rng(seed).random((count, 3, 2))


def max_angle(tri):
    out = 0.0
    for k in range(3):
        u, v = tri[k - 1] - tri[k], tri[(k + 1) % 3] - tri[k]
        out = max(out, math.acos(np.clip(u @ v / (np.linalg.norm(u) * np.linalg.norm(v)), -1, 1)))
    return out


def test_criterion_1_finite_criterion_equality():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    worst_len = worst_f = 0.0
    done = certified = 0
    while done < 50:
        n = int(rng.choice([2, 3, 4]))
        pts = rng.random((n, 2))
        tree = steiner_exact(pts)
        r = 0.05 * point_set_diameter(pts)
        m = PointCloud.finite(pts)
        try:
            g = trimmed_tree(m, r)
        except SteinerError:
            continue  # the trim needs a full tree whose terminal edges exceed r
        worst_len = max(worst_len, abs(total_length(g) - (tree.length - r * n)))
        worst_f = max(worst_f, abs(energy(m, g).value - r))
        certified += criterion_check(m, g, r).verdict == CERTIFIED
        done += 1
    elapsed = time.perf_counter() - t0
    ok = worst_len <= 1e-9 and worst_f <= 1e-9 and certified == 50 and elapsed <= 10
    record(1, ok, f"length err {worst_len:.1e}, |F-r| {worst_f:.1e}, certified {certified}/50", elapsed, 10)


def test_criterion_2_steiner_exactness():
    t0 = time.perf_counter()
    sq = steiner_exact([(0, 0), (1, 0), (1, 1), (0, 1)]).length
    tris = random_triangles(1000, 2)
    oracle = weiszfeld_length(tris)
    trees = [steiner_3(*t) for t in tris]
    err = max(abs(t.length - o) for t, o in zip(trees, oracle))
    wide = [k for k, t in enumerate(tris) if max_angle(t) >= 2 * math.pi / 3]
    wide_ok = all(len(trees[k].steiner_points) == 0 for k in wide)
    elapsed = time.perf_counter() - t0
    ok = abs(sq - (1 + math.sqrt(3))) <= 1e-9 and err <= 1e-9 and wide_ok and elapsed <= 30
    record(2, ok, f"square err {abs(sq - 1 - math.sqrt(3)):.1e}, oracle err {err:.1e}, "
                  f"{len(wide)} wide triangles without Steiner point: {wide_ok}", elapsed, 30)


def test_criterion_3_defect_constant_scale_invariance():
    t0 = time.perf_counter()
    apexes = np.radians(np.linspace(10.5, 118.5, 20))
    worst_rel, lo, hi = 0.0, math.inf, -math.inf
    for a in apexes:
        ds = [apex_d(a, eps) for eps in (0.1, 1.0, 10.0)]
        worst_rel = max(worst_rel, (max(ds) - min(ds)) / abs(ds[1]))
        lo, hi = min(lo, *ds), max(hi, *ds)
    elapsed = time.perf_counter() - t0
    ok = worst_rel <= 1e-10 and lo > 0 and hi < 2
    record(3, ok, f"relative spread {worst_rel:.1e}, d in [{lo:.4f}, {hi:.4f}]", elapsed)


def test_criterion_4_rose_and_forest_line():
    t0 = time.perf_counter()
    worst, checked = 0.0, 0
    for tri in random_triangles(1000, 2):
        tree = steiner_3(*tri)
        if not tree.is_full:
            continue
        for w in PATTERNS:
            worst = max(worst, abs(assign_rose_weights(tree, RoseOfWinds.aligned_with(tree, w))))
        checked += 1

    rng = np.random.default_rng(4)
    failures = trials = 0
    while trials < 1000:
        forest = [steiner_exact(rng.random((int(rng.integers(2, 6)), 2)) + 2 * k) for k in range(rng.integers(1, 3))]
        if not all(t.is_full for t in forest):
            continue  # the inequality is stated for full forests
        leaves = np.vstack([t.terminals for t in forest])
        if rng.random() < 0.5:
            # line through two leaves, so some endpoints really lie on it
            i, j = rng.choice(len(leaves), 2, replace=False)
            line = (leaves[i], leaves[j])
        else:
            line = (rng.random(2) * 4, rng.random(2) * 4)
        try:
            rep = check_forest_line_inequality(forest, line)
        except SteinerError:
            continue  # a whole component on the line is outside the statement
        failures += not rep.holds
        trials += 1
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and failures == 0
    record(4, ok, f"{checked} full trees, max |rose sum| {worst:.1e}, forest/line failures {failures}/1000",
           elapsed)


def test_criterion_5_horseshoe():
    t0 = time.perf_counter()
    m, g, p = horseshoe(5.0, 1.0, 5000)
    f = energy(m, g).value
    rep = validate(m, g, 1.0, tol_angle=1e-3)
    elapsed = time.perf_counter() - t0
    ok = abs(f - 1.0) <= 1e-6 and p.length < 2 * math.pi * 4 and rep.passed and elapsed <= 20
    record(5, ok, f"F-1 = {f - 1:.1e}, length {p.length:.5f} < {8 * math.pi:.5f}, verdict {rep.verdict}",
           elapsed, 20)


def test_criterion_6_validator_discrimination():
    t0 = time.perf_counter()
    pos = {fx.name: fx.run() for fx in positive_fixtures()}
    neg = {fx.name: (fx.expected_failure, fx.run().failed()) for fx in negative_fixtures()}
    pos_ok = all(r.passed for r in pos.values())
    neg_ok = all(failed == [want] for want, failed in neg.values())
    kappa = pos["horseshoe"].rule("R6").detail["kappa_max"]
    elapsed = time.perf_counter() - t0
    ok = pos_ok and neg_ok and abs(kappa - 0.25) <= 1e-3 and kappa <= 1.0
    record(6, ok, f"positive {sum(r.passed for r in pos.values())}/{len(pos)}, negative exact "
                  f"{sum(f == [w] for w, f in neg.values())}/{len(neg)}, arc kappa {kappa:.6f}", elapsed)


def test_criterion_7_optimizer_against_bounds():
    t0 = time.perf_counter()
    rows = []
    instances = {
        "two-point": (PointCloud.finite([(0.0, 0.0), (1.0, 0.0)]), 0.2),
        "equilateral": (PointCloud.finite([(0.0, 0.0), (1.0, 0.0), (0.5, math.sqrt(3) / 2)]), 0.1),
    }
    finite_ok = True
    for name, (m, r) in instances.items():
        bound = criterion_check(m, trimmed_tree(m, r), r).bound
        ratios = []
        for seed in range(5):
            tr = optimize(m, OptimizerConfig(r=r, seed=seed))
            ratios.append(tr.final_length / bound)
            finite_ok &= tr.final_violation <= 1e-6 and ratios[-1] <= 1.02
        rows.append(f"{name} worst ratio {max(ratios):.4f}")

    circle = PointCloud.circle(5.0, 2000)
    init = concentric_polygon((0.0, 0.0), 4.0, 60)
    tr = optimize(circle, OptimizerConfig(r=1.0, init="user", init_graph=init, max_iters=3000))
    circle_ratio = tr.final_length / HORSESHOE_REFERENCE
    rows.append(f"circle ratio {circle_ratio:.4f}")

    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        pts = rng.random((20, 2)) * 3
        x, edges = random_tree(PointCloud.finite(pts), 0.3, 6, rng)
        r, w = rng.uniform(0.05, 0.5), 10.0 ** rng.uniform(0, 4)
        _, grad = penalized_objective(x, edges, pts, r, w)
        fd = np.zeros(x.size)
        for k in range(x.size):
            e = np.zeros(x.size)
            e[k] = 1e-6
            f = lambda z: penalized_objective(z.reshape(-1, 2), edges, pts, r, w)[0]  # noqa: E731
            fd[k] = (f(x.ravel() + e) - f(x.ravel() - e)) / 2e-6
        worst = max(worst, np.linalg.norm(grad - fd) / np.linalg.norm(fd))
    rows.append(f"gradient rel err {worst:.1e}")
    elapsed = time.perf_counter() - t0
    ok = finite_ok and circle_ratio <= 1.05 and tr.final_violation <= 1e-6 and worst <= 1e-5 and elapsed <= 300
    record(7, ok, ", ".join(rows), elapsed, 300)


def test_criterion_8_determinism_and_io(tmp_path):
    import sys
    from pathlib import Path

    t0 = time.perf_counter()
    m = PointCloud.finite([(0.0, 0.0), (1.0, 0.0), (0.5, math.sqrt(3) / 2)])
    cfg = OptimizerConfig(r=0.1, seed=11, max_iters=500)
    a, b = optimize(m, cfg).to_json(), optimize(m, cfg).to_json()
    same_trace = a == b

    g = trimmed_tree(m, 0.1)
    trips = {
        "PointCloud": (m, PointCloud),
        "SigmaGraph": (g, SigmaGraph),
        "SteinerTree": (steiner_exact(m.points), SteinerTree),
        "OptimizerConfig": (OptimizerConfig(r=0.1, init="user", init_graph=g), OptimizerConfig),
        "OptimizerTrace": (OptimizerTrace.from_json(a), OptimizerTrace),
        "RunConfig": (RunConfig("validate", radii=[0.1], optimizer={"r": 1}), RunConfig),
    }
    bad = [k for k, (obj, cls) in trips.items()
           if json.loads(json.dumps(cls.from_dict(json.loads(json.dumps(obj.to_dict()))).to_dict()))
           != json.loads(json.dumps(obj.to_dict()))]
    # report-only schemas must at least survive a JSON round trip unchanged
    for name, d in {"ValidationReport": validate(m, g, 0.1).to_dict(),
                    "CriterionReport": criterion_check(m, g, 0.1).to_dict(),
                    "HorseshoeParams": horseshoe(5.0, 1.0, 1000)[2].to_dict()}.items():
        if json.loads(json.dumps(d)) != d:
            bad.append(name)

    sys.path.insert(0, str(Path(__file__).parent))
    from test_svg_cli import GOLDEN, tripod_svg

    golden_ok = tripod_svg() == (GOLDEN / "trimmed_tripod.svg").read_text() == tripod_svg()
    elapsed = time.perf_counter() - t0
    ok = same_trace and not bad and golden_ok
    record(8, ok, f"identical traces {same_trace}, schema mismatches {bad or 'none'}, golden SVG stable {golden_ok}",
           elapsed)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
