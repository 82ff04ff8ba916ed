import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maxdist.energy import PointCloud, energy
from maxdist.geometry import rotate
from maxdist.minlab import (
    CERTIFIED,
    INCONCLUSIVE,
    NOT_MINIMIZER,
    criterion_check,
    horseshoe,
    horseshoe_length,
    negative_fixtures,
    positive_fixtures,
    tangent_needed,
    trimmed_tree,
)
from maxdist.sigma import SigmaGraph, total_length
from maxdist.steiner import SteinerError, steiner_exact

SQRT3 = math.sqrt(3.0)
PAIR = PointCloud.finite([(0.0, 0.0), (1.0, 0.0)])
TRI = PointCloud.finite([(0.0, 0.0), (1.0, 0.0), (0.5, SQRT3 / 2)])


def test_trimmed_segment_is_certified():
    rep = criterion_check(PAIR, trimmed_tree(PAIR, 0.2), 0.2)
    assert rep.verdict == CERTIFIED
    assert rep.sigma_length == pytest.approx(0.6, abs=1e-15)
    assert rep.bound == pytest.approx(0.6, abs=1e-15)


def test_trimmed_tripod_is_certified():
    rep = criterion_check(TRI, trimmed_tree(TRI, 0.1), 0.1)
    assert rep.verdict == CERTIFIED
    assert rep.sigma_length == pytest.approx(SQRT3 - 0.3, abs=1e-12)


def test_longer_feasible_candidate_is_not_minimizer():
    rep = criterion_check(PAIR, SigmaGraph.from_polyline([(0.0, 0.0), (1.0, 0.0)]), 0.2)
    assert rep.verdict == NOT_MINIMIZER and rep.feasible


def test_uncovering_candidate_is_not_minimizer():
    rep = criterion_check(PAIR, SigmaGraph.point((0.5, 0.0)), 0.2)
    assert rep.verdict == NOT_MINIMIZER and not rep.feasible


def test_near_feasible_within_delta_is_inconclusive():
    m = PointCloud(PAIR.points, delta=1e-3)
    g = SigmaGraph.from_polyline([(0.2005, 0.0), (0.8, 0.0)])
    assert criterion_check(m, g, 0.2).verdict == INCONCLUSIVE


def test_criterion_input_errors():
    with pytest.raises(ValueError):
        criterion_check(PointCloud.finite([(0.0, 0.0)]), SigmaGraph.point((0, 0)), 0.1)
    with pytest.raises(ValueError):
        criterion_check(PAIR, trimmed_tree(PAIR, 0.2), 0.0)


def test_trim_lengths():
    g = trimmed_tree(PAIR, 0.2)
    np.testing.assert_allclose(sorted(g.coords[:, 0]), [0.2, 0.8], atol=1e-15)
    sq = PointCloud.finite([(0, 0), (1, 0), (1, 1), (0, 1)])
    assert total_length(trimmed_tree(sq, 0.1)) == pytest.approx(1 + SQRT3 - 0.4, abs=1e-12)


def test_trim_rejects_short_edges_and_interior_terminals():
    with pytest.raises(SteinerError):
        trimmed_tree(PAIR, 0.6)
    with pytest.raises(SteinerError):
        trimmed_tree(PointCloud.finite([(0, 0), (1, 0), (2, 0)]), 0.1)


@settings(max_examples=20)
@given(st.integers(0, 2**32 - 1), st.integers(2, 5))
def test_trimmed_tree_reaches_lower_bound(seed, n):
    pts = np.random.default_rng(seed).random((n, 2)) * 10
    tree = steiner_exact(pts)
    shortest = min(math.hypot(*(tree.nodes[i] - tree.nodes[j])) for i, j in tree.edges)
    if not tree.is_full or shortest < 1e-3:
        return
    r = 0.2 * shortest
    m = PointCloud.finite(pts)
    g = trimmed_tree(m, r)
    assert energy(m, g).value <= r * (1 + 1e-12)
    rep = criterion_check(m, g, r)
    assert rep.verdict == CERTIFIED
    assert rep.sigma_length == pytest.approx(tree.length - n * r, abs=1e-9)


def test_horseshoe_reference_values():
    m, g, p = horseshoe(5.0, 1.0, 5000)
    assert abs(energy(m, g).value - 1.0) <= 1e-10
    assert p.length == pytest.approx(23.98473, abs=5e-5)
    assert p.length < 2 * math.pi * 4
    assert p.half_gap == pytest.approx(math.atan(0.75), abs=1e-4)
    assert p.tangent_length == pytest.approx(2.0, abs=1e-3)
    assert sorted(g.degree.values()) == [1, 1, 2, 2]


def test_horseshoe_length_formula():
    p = horseshoe(5.0, 1.0, 5000)[2]
    assert p.length == pytest.approx(horseshoe_length(5.0, 1.0, p.half_gap), rel=1e-6)
    assert tangent_needed(5.0, 1.0, p.half_gap) == pytest.approx(p.tangent_length, abs=1e-12)


def test_horseshoe_guards():
    with pytest.raises(ValueError):
        horseshoe(4.9, 1.0)
    with pytest.raises(ValueError):
        horseshoe(5.0, 1.0, samples=500)


@settings(max_examples=5)
@given(st.floats(0.2, 4.0), st.floats(-3.0, 3.0), st.floats(-10, 10), st.floats(-10, 10))
def test_horseshoe_similarity(lam, gap, cx, cy):
    base = horseshoe(5.0, 1.0, 2000)[2]
    m, g, p = horseshoe(5.0 * lam, lam, 2000, center=(cx, cy), gap_direction=gap)
    assert p.length == pytest.approx(lam * base.length, rel=1e-9)
    assert abs(energy(m, g).value - lam) <= 1e-10 * lam


def test_rigid_motion_preserves_certificate():
    pts = rotate(TRI.points, 0.7) * 3.0 + [5.0, -1.0]
    m = PointCloud.finite(pts)
    assert criterion_check(m, trimmed_tree(m, 0.3), 0.3).verdict == CERTIFIED


@pytest.mark.parametrize("fixture", positive_fixtures(), ids=lambda f: f.name)
def test_positive_fixture_passes(fixture):
    rep = fixture.run()
    assert rep.passed, rep.failed()


@pytest.mark.parametrize("fixture", negative_fixtures(), ids=lambda f: f.name)
def test_negative_fixture_fails_exactly_its_rule(fixture):
    rep = fixture.run()
    assert rep.failed() == [fixture.expected_failure]
    assert rep.verdict == "fail"


@settings(max_examples=25)
@given(st.integers(0, 2**32 - 1), st.floats(-3.2, 3.2), st.floats(0.1, 20.0), st.booleans())
def test_criterion_verdict_invariant_under_similarity(seed, ang, lam, longer):
    rng = np.random.default_rng(seed)
    m = PointCloud.finite(TRI.points + rng.normal(scale=0.05, size=(3, 2)))
    r = 0.05
    g = trimmed_tree(m, r)
    if longer:
        g = steiner_exact(m.points).to_sigma()
    base = criterion_check(m, g, r).verdict

    def move(p):
        return lam * rotate(np.asarray(p, dtype=float), ang) + [1.5, -0.5]

    m2 = PointCloud.finite(move(m.points))
    g2 = g.transformed(move)
    assert criterion_check(m2, g2, lam * r).verdict == base
