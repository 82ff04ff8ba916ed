import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maxdist.energy import PointCloud
from maxdist.minlab import corner_fixture, trimmed_tree
from maxdist.sigma import SigmaGraph
from maxdist.validator import (
    InfeasibleError,
    check_ahlfors,
    check_curvature_bound,
    classify,
    discrete_curvature,
    fit_ray,
    synthetic_classification,
    validate,
)

SQRT3 = math.sqrt(3.0)
TRI = PointCloud.finite([(0.0, 0.0), (1.0, 0.0), (0.5, SQRT3 / 2)])


def test_segment_has_two_isolated_witnessed_points():
    m = PointCloud.finite([(0.0, 0.0), (1.0, 0.0)])
    cls = classify(m, trimmed_tree(m, 0.2), 0.2)
    assert cls.counts()["X"] == 2 and cls.counts()["E"] == 0
    ends = cls.samples.points[cls.indices("X")]
    np.testing.assert_allclose(sorted(ends[:, 0]), [0.2, 0.8], atol=1e-12)


def test_concentric_ring_is_all_energetic():
    n = 400
    m = PointCloud.circle(5.0, n)
    th = 2 * math.pi * np.arange(n) / n
    ring = SigmaGraph.from_polyline(np.column_stack([4 * np.cos(th), 4 * np.sin(th)]), closed=True)
    cls = classify(m, ring, 1.0)
    assert cls.counts()["E"] == len(cls.samples)


def test_tripod_labels_and_angles():
    g = trimmed_tree(TRI, 0.1)
    cls = classify(TRI, g, 0.1)
    assert cls.counts()["X"] == 3
    center = int(np.argmax(cls.degree))
    assert cls.degree[center] == 3 and cls.labels[center] == "S"
    rep = validate(TRI, g, 0.1)
    assert rep.passed
    assert abs(rep.rule("R4").margin) <= 1e-8


def test_infeasible_candidate_is_rejected():
    m = PointCloud.finite([(0.0, 0.0), (1.0, 0.0)])
    with pytest.raises(InfeasibleError):
        classify(m, SigmaGraph.point((0.5, 0.0)), 0.2)


def test_fit_ray_direction():
    pts = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
    u, _ = fit_ray(pts)
    np.testing.assert_allclose(np.abs(u), [1 / math.sqrt(2)] * 2, atol=1e-12)


def test_discrete_curvature_of_circle_and_line():
    assert discrete_curvature((0, 0), (1, 0), (2, 0)) == 0.0
    a = [(math.cos(t), math.sin(t)) for t in (0.0, 0.1, 0.2)]
    assert discrete_curvature(*a) == pytest.approx(1.0, rel=1e-12)


def test_straight_segment_has_zero_curvature():
    g = SigmaGraph.from_polyline(np.column_stack([np.linspace(0, 1, 50), np.zeros(50)]))
    res = check_curvature_bound(g, synthetic_classification(g, 0.1), 0.1)
    assert res.passed
    assert res.detail["kappa_max"] == 0.0


def test_one_sided_witness_must_sit_on_the_outside():
    th = np.linspace(math.pi, 0, 200)  # clockwise, so the left normal points outward
    arc = SigmaGraph.from_polyline(np.column_stack([np.cos(th), np.sin(th)]))
    assert check_curvature_bound(arc, synthetic_classification(arc, 1.0, both_sides=False), 1.0).passed
    inward = SigmaGraph.from_polyline(np.column_stack([np.cos(th[::-1]), np.sin(th[::-1])]))
    assert not check_curvature_bound(inward, synthetic_classification(inward, 1.0, both_sides=False), 1.0).passed


def test_two_sided_curvature_bound():
    th = np.linspace(0, math.pi, 200)
    arc = SigmaGraph.from_polyline(np.column_stack([np.cos(th), np.sin(th)]))
    assert check_curvature_bound(arc, synthetic_classification(arc, 1.0), 1.0).passed
    res = check_curvature_bound(arc, synthetic_classification(arc, 2.0), 2.0)
    assert not res.passed
    assert res.detail["kappa_max"] == pytest.approx(1.0, rel=1e-3)


def test_corner_angles():
    assert validate(*_fx(corner_fixture(120.0))).passed
    assert validate(*_fx(corner_fixture(150.0))).passed
    rep = validate(*_fx(corner_fixture(100.0)))
    assert "R3_tangent_angles" in rep.failed()


def _fx(f):
    return f.m, f.g, f.r


def test_ahlfors_constants():
    seg = SigmaGraph.from_polyline([(0.0, 0.0), (1.0, 0.0)])
    rep = check_ahlfors(seg, radii=[0.01], centers=np.array([[0.5, 0.0], [0.0, 0.0]]))
    assert rep.C_hat == pytest.approx(2.0) and rep.c_hat == pytest.approx(1.0)
    tri = trimmed_tree(TRI, 0.1)
    centre = tri.coords[np.argmax([tri.degree[v] for v in tri.vertex_ids])]
    rep = check_ahlfors(tri, radii=[0.01], centers=centre[None])
    assert rep.C_hat == pytest.approx(3.0)
    assert rep.passed
    with pytest.raises(ValueError):
        check_ahlfors(seg, radii=[2.0])


def test_report_json_shape():
    rep = validate(*_fx(corner_fixture(120.0)))
    d = rep.to_dict()
    assert d["verdict"] == "pass"
    assert [r["name"] for r in d["rules"]] == sorted(r["name"] for r in d["rules"])
    assert {r["name"].split("_")[0] for r in d["rules"]} == {f"R{k}" for k in range(8)}


@settings(max_examples=15)
@given(st.floats(-3.2, 3.2), st.floats(0.2, 5.0), st.floats(-5, 5), st.floats(-5, 5))
def test_verdict_invariant_under_similarity(ang, lam, tx, ty):
    base = validate(TRI, trimmed_tree(TRI, 0.1), 0.1)

    def move(p):
        c, s = math.cos(ang), math.sin(ang)
        p = np.asarray(p)
        return lam * (p @ np.array([[c, s], [-s, c]])) + [tx, ty]

    m2 = PointCloud.finite(move(TRI.points))
    moved = validate(m2, trimmed_tree(m2, 0.1 * lam), 0.1 * lam)
    assert moved.verdict == base.verdict
    assert moved.counts == base.counts


def test_classification_is_deterministic():
    g = trimmed_tree(TRI, 0.1)
    a, b = classify(TRI, g, 0.1), classify(TRI, g, 0.1)
    assert np.array_equal(a.labels, b.labels)
    assert np.array_equal(a.samples.points, b.samples.points)


def test_e_points_near_x_points_are_counted():
    import dataclasses

    from maxdist.validator import _e_near_x

    m = PointCloud.finite([(0, 0), (1, 0)])
    cls = classify(m, trimmed_tree(m, 0.2), 0.2)
    assert _e_near_x(cls) == 0
    labels = cls.labels.copy()
    x0 = cls.indices("X")[0]
    pts = cls.samples.points
    near = np.nonzero(np.hypot(*(pts - pts[x0]).T) <= cls.rho_iso)[0]
    labels[[k for k in near if k != x0]] = "E"
    assert _e_near_x(dataclasses.replace(cls, labels=labels)) == len(near) - 1 > 0
