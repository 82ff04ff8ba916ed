import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from maxdist.energy import PointCloud, energy, find_energetic, is_feasible
from maxdist.geometry import GeometryError, rotate
from maxdist.sigma import SigmaGraph

TWO = PointCloud.finite([(0, 0), (1, 0)])
TRIMMED = SigmaGraph.from_segments([((0.2, 0), (0.8, 0))])


def brute_distances(m, pts_poly):
    """Distance from each M point to a dense resampling of every segment."""
    t = np.linspace(0, 1, 20001)[:, None]
    out = np.full(len(m), np.inf)
    for a, b in pts_poly:
        q = np.asarray(a) + t * (np.asarray(b) - np.asarray(a))
        d = np.hypot(m[:, None, 0] - q[None, :, 0], m[:, None, 1] - q[None, :, 1]).min(axis=1)
        out = np.minimum(out, d)
    return out


def test_single_point_graph():
    assert energy(PointCloud.finite([(0, 0)]), SigmaGraph.point((3, 4))).value == 5.0


def test_circle_to_centre():
    m = PointCloud.circle(1.0, 1000)
    assert energy(m, SigmaGraph.point((0, 0))).value == pytest.approx(1.0, abs=1e-5)


def test_trimmed_segment_energy():
    res = energy(TWO, TRIMMED, per_point=True)
    assert res.value == pytest.approx(0.2, abs=1e-15)
    assert res.value == res.per_point.max()
    assert res.argmax_index == 0  # tie broken toward the lowest index


def test_feasibility_gate():
    assert is_feasible(TWO, TRIMMED, 0.2, 1e-9)
    assert not is_feasible(TWO, TRIMMED, 0.19, 1e-9)
    with pytest.raises(ValueError):
        is_feasible(TWO, TRIMMED, 0.0)


def test_witnesses_of_trimmed_segment():
    wit = find_energetic(TWO, TRIMMED, 0.2)
    found = sorted({(round(w.x.x, 12), round(w.y.x, 12)) for w in wit})
    assert found == [(0.2, 0.0), (0.8, 1.0)]
    for w in wit:
        assert w.accepted(1e-6 * 0.2)


def test_interior_points_have_no_witness():
    wit = find_energetic(TWO, TRIMMED, 0.2)
    assert all(abs(w.x.x - 0.5) > 0.25 for w in wit)


def test_concentric_circle_all_energetic():
    n = 400
    m = PointCloud.circle(1.0, n)
    th = 2 * math.pi * np.arange(n) / n
    g = SigmaGraph.from_polyline(0.8 * np.column_stack([np.cos(th), np.sin(th)]), closed=True)
    wit = find_energetic(m, g, 0.2)
    assert {w.x_index for w in wit} == set(range(n))
    # radial witnesses: y = x scaled by 1/0.8
    for w in wit:
        if w.y_index == w.x_index:
            assert np.allclose(np.array(w.y) * 0.8, np.array(w.x), atol=1e-12)


def test_distances_match_dense_sampling():
    rng = np.random.default_rng(5)
    pts = rng.random((6, 2))
    g = SigmaGraph.from_polyline(pts)
    m = rng.random((300, 2)) * 2 - 0.5
    res = energy(PointCloud(m), g, per_point=True)
    brute = brute_distances(m, list(zip(pts[:-1], pts[1:])))
    assert np.all(res.per_point <= brute + 1e-12)
    np.testing.assert_allclose(res.per_point, brute, atol=1e-4)


def test_point_cloud_validation_and_json():
    with pytest.raises(GeometryError):
        PointCloud(np.zeros((0, 2)))
    with pytest.raises(GeometryError):
        PointCloud([(0, 0)], delta=-1)
    m = PointCloud.circle(2.0, 17, center=(0.5, -1))
    m2 = PointCloud.from_json(m.to_json())
    assert m2.to_json() == m.to_json()
    with pytest.raises(ValueError):
        PointCloud.from_dict({"points": [[0, 0]], "delta": 0, "extra": 1})


def test_segment_generator_density():
    m = PointCloud.segment((0, 0), (1, 0), 11)
    assert len(m) == 11 and m.delta == pytest.approx(0.05)


coord = st.floats(-5, 5, allow_nan=False)


@given(st.integers(0, 2**32 - 1), st.floats(-3.2, 3.2), coord, coord)
def test_energy_invariant_under_rigid_motion(seed, ang, tx, ty):
    rng = np.random.default_rng(seed)
    g = SigmaGraph.from_polyline(rng.random((5, 2)))
    m = PointCloud(rng.random((40, 2)) * 3 - 1)
    move = lambda p: rotate(p, ang) + [tx, ty]  # noqa: E731
    e0 = energy(m, g).value
    e1 = energy(m.transformed(move), g.transformed(move)).value
    assert e1 == pytest.approx(e0, rel=1e-12, abs=1e-12 * 10)


@given(st.integers(0, 2**32 - 1))
def test_energy_monotone(seed):
    rng = np.random.default_rng(seed)
    pts = rng.random((6, 2))
    m = rng.random((30, 2)) * 2
    g_small = SigmaGraph.from_polyline(pts[:3])
    g_big = SigmaGraph.from_polyline(pts)
    e_small = energy(PointCloud(m), g_small).value
    assert energy(PointCloud(m), g_big).value <= e_small
    assert energy(PointCloud(np.vstack([m, rng.random((5, 2)) * 3])), g_small).value >= e_small


@given(st.integers(0, 2**32 - 1), st.integers(8, 200))
def test_sampled_energy_within_delta_of_continuum(seed, n):
    # continuum M = unit circle; Sigma a random short polyline inside it
    rng = np.random.default_rng(seed)
    g = SigmaGraph.from_polyline(rng.random((4, 2)) - 0.5)
    m = PointCloud.circle(1.0, n)
    dense = energy(PointCloud.circle(1.0, 20000), g).value
    assert abs(energy(m, g).value - dense) <= m.delta + 2 * math.pi / 20000


@given(st.integers(0, 2**32 - 1), st.floats(0.05, 0.5))
def test_witness_gates_hold_as_stored(seed, r):
    rng = np.random.default_rng(seed)
    m = PointCloud(rng.random((30, 2)))
    g = SigmaGraph.from_polyline(rng.random((4, 2)))
    rr = max(r, energy(m, g).value)
    eta = 1e-6 * rr
    for w in find_energetic(m, g, rr, eta):
        assert w.slack <= eta and w.ball_clearance >= -eta
