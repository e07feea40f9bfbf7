import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from peghole.geom import PegHoleGeometry, circle_intersection
from peghole.sim import rim_support_points
from peghole.stability import (
    AppliedForce,
    Contact,
    FreeFallError,
    MomentLabel,
    PlanarVerdict,
    Static,
    Tilt,
    boundary_distance,
    cone_edges_3d,
    convex_hull_2d,
    friction_cone_halfangle,
    moment_label_classify,
    planar_resting_contacts,
    planar_static_check,
    stability_check_3d,
    support_polygon,
    wrench_feasible,
)

G = PegHoleGeometry()
UP2 = np.array([0.0, 1.0])
UP3 = np.array([0.0, 0.0, 1.0])


def ground(points, mu=0.6):
    return [Contact(np.array([p[0], p[1], 0.0]), UP3, mu) for p in points]


def brute_hull(points):
    """O(n^3) oracle: an ordered pair is a hull edge when no point lies to its right."""
    pts = np.asarray(points, float)
    verts = set()
    for i, a in enumerate(pts):
        for j, b in enumerate(pts):
            if i == j:
                continue
            d = b - a
            cross = d[0] * (pts[:, 1] - a[1]) - d[1] * (pts[:, 0] - a[0])
            if np.all(cross >= -1e-15):
                verts.update((i, j))
    return {tuple(np.round(pts[k], 12)) for k in verts}


def test_halfangle_values():
    assert friction_cone_halfangle(0.0) == 0.0
    assert math.isclose(friction_cone_halfangle(1.0), math.pi / 2)
    assert math.isclose(friction_cone_halfangle(0.5), 0.9272952180016122)
    with pytest.raises(ValueError):
        friction_cone_halfangle(-0.1)


def test_moment_label_single_contact():
    c = [Contact(np.zeros(2), UP2, 0.0)]
    assert moment_label_classify((1.0, 0.0), c) is MomentLabel.MINUS
    assert moment_label_classify((-1.0, 0.0), c) is MomentLabel.PLUS
    assert moment_label_classify((0.0, 2.0), c) is MomentLabel.MIXED


def test_moment_label_two_contact_lobe():
    contacts = planar_resting_contacts(0.0, 10e-3, 15e-3, 11e-3)
    # far left, the upward forces all pass to the right of the point
    assert moment_label_classify((-0.03, 0.0), contacts) is MomentLabel.PLUS
    assert moment_label_classify((0.03, 0.0), contacts) is MomentLabel.MINUS


def test_two_contact_planar_verdicts():
    # peg centered at 0, slot centered to its right: the right part of the
    # peg bottom hangs over the slot
    contacts = planar_resting_contacts(0.0, 10e-3, 15e-3, 11e-3)
    assert [c.position[0] for c in contacts] == [-10e-3, 4e-3]
    down = np.array([0.0, -10.0])
    assert planar_static_check(AppliedForce((10e-3, 0.0), down), contacts) is PlanarVerdict.TILT_RIGHT
    assert planar_static_check(AppliedForce((-10e-3, 0.0), down), contacts) is PlanarVerdict.STATIC
    # mirrored geometry tips the other way
    mirrored = planar_resting_contacts(0.0, 10e-3, -15e-3, 11e-3)
    assert planar_static_check(AppliedForce((-10e-3, 0.0), down), mirrored) is PlanarVerdict.TILT_LEFT


@settings(max_examples=60)
@given(st.floats(-20e-3, 20e-3), st.floats(2e-3, 19e-3), st.sampled_from([-1.0, 1.0]))
def test_planar_mirror_symmetry(x, d, side):
    contacts = planar_resting_contacts(0.0, 10e-3, side * d, 11e-3)
    mirror = planar_resting_contacts(0.0, 10e-3, -side * d, 11e-3)
    if not contacts:
        return
    v = planar_static_check(AppliedForce((x, 0.0), (0.0, -10.0)), contacts)
    w = planar_static_check(AppliedForce((-x, 0.0), (0.0, -10.0)), mirror)
    swap = {PlanarVerdict.STATIC: PlanarVerdict.STATIC,
            PlanarVerdict.TILT_LEFT: PlanarVerdict.TILT_RIGHT,
            PlanarVerdict.TILT_RIGHT: PlanarVerdict.TILT_LEFT}
    assert w is swap[v]


def test_planar_force_through_single_contact():
    c = [Contact(np.array([0.002, 0.0]), UP2, 0.6)]
    assert planar_static_check(AppliedForce((0.002, 0.01), (0.0, -5.0)), c) is PlanarVerdict.STATIC


def test_planar_errors():
    with pytest.raises(FreeFallError):
        planar_static_check(AppliedForce((0, 0), (0, -1)), [])
    with pytest.raises(ValueError):
        planar_static_check(AppliedForce((0, 0), (0, 1)), [Contact(np.zeros(2), UP2)])
    with pytest.raises(ValueError):
        Contact(np.zeros(2), np.array([0.0, 2.0]))


def test_hull_cases():
    sq = [(0, 0), (1, 0), (1, 1), (0, 1)]
    h = convex_hull_2d(sq)
    assert {tuple(p) for p in h} == set(map(tuple, np.asarray(sq, float)))
    area = 0.5 * sum(h[i - 1][0] * h[i][1] - h[i][0] * h[i - 1][1] for i in range(len(h)))
    assert area > 0  # counter-clockwise
    h2 = convex_hull_2d(sq + [(0.5, 0.5)])
    assert len(h2) == 4


def test_rim_hull_matches_brute_force():
    e = np.array([8e-3, 0.0])
    pts = rim_support_points((0.0, 0.0), e, G)
    hull = convex_hull_2d(pts)
    assert {tuple(np.round(p, 12)) for p in hull} == brute_hull(pts)
    # the chord endpoints are the rim/hole-rim intersections
    ends = circle_intersection((0, 0), G.peg_radius, e, G.hole_radius)
    for q in ends:
        assert np.min(np.hypot(*(hull - q).T)) < 1e-12
    # every hull vertex is on the rim and outside the hole
    assert np.allclose(np.hypot(hull[:, 0], hull[:, 1]), G.peg_radius)
    assert np.all(np.hypot(*(hull - e).T) >= G.hole_radius - 1e-12)


@settings(max_examples=50)
@given(st.lists(st.tuples(st.floats(-1, 1), st.floats(-1, 1)), min_size=3, max_size=25))
def test_hull_property(points):
    pts = np.asarray(points, float)
    hull = convex_hull_2d(pts)
    if len(hull) < 3:
        return
    poly = support_polygon(ground(pts))
    for p in pts:
        assert boundary_distance(poly, p) <= 1e-9


def test_support_polygon_degenerate():
    assert support_polygon(ground([(0, 0)])).degenerate == "point"
    assert support_polygon(ground([(0, 0), (1, 0)])).degenerate == "segment"
    with pytest.raises(ValueError):
        support_polygon([])


def test_stability_3d_cases():
    poly = support_polygon(ground([(0, 0), (1, 0), (1, 1), (0, 1)]))
    down = np.array([0.0, 0.0, -10.0])
    assert isinstance(stability_check_3d(AppliedForce((0.5, 0.5, 0), down), poly), Static)
    assert isinstance(stability_check_3d(AppliedForce((1.0, 0.5, 0), down), poly), Static)
    v = stability_check_3d(AppliedForce((1.5, 0.5, 0), down), poly)
    assert isinstance(v, Tilt)
    assert np.allclose(v.axis.direction, (0, 1))
    assert np.allclose(v.axis.normal, (1, 0))
    with pytest.raises(ValueError):
        stability_check_3d(AppliedForce((0.5, 0.5, 0), -down), poly)


def test_partial_overlap_tilts_about_chord():
    e = np.array([8e-3, 0.0])
    poly = support_polygon(ground(rim_support_points((0.0, 0.0), e, G)))
    v = stability_check_3d(AppliedForce((9e-3, 0.0, 0.0), (0, 0, -10.0)), poly)
    assert isinstance(v, Tilt)
    ends = circle_intersection((0, 0), G.peg_radius, e, G.hole_radius)
    assert math.isclose(v.axis.length, float(np.hypot(*(ends[0] - ends[1]))))
    assert v.axis.normal @ e > 0


def test_cone_edges_3d():
    edges = cone_edges_3d(Contact(np.zeros(3), UP3, 0.5), 8)
    assert edges.shape == (8, 3)
    assert np.allclose(edges[:, 2], 1.0)
    assert np.allclose(np.hypot(edges[:, 0], edges[:, 1]), 0.5)


def test_wrench_feasible_cases():
    ring = [(0.01 * math.cos(a), 0.01 * math.sin(a)) for a in np.linspace(0, 2 * np.pi, 36, endpoint=False)]
    assert wrench_feasible(AppliedForce((0, 0, 0.05), (0, 0, -10.0)), ground(ring))
    one = [Contact(np.zeros(3), UP3, 0.0)]
    assert not wrench_feasible(AppliedForce((0.005, 0, 0), (0, 0, -10.0)), one)
    assert wrench_feasible(AppliedForce((0.0, 0, 0), (0, 0, -10.0)), one)
    # friction carries a small horizontal push
    assert wrench_feasible(AppliedForce((0, 0, 0), (1.0, 0, -10.0)), ground(ring, 0.6))
    assert not wrench_feasible(AppliedForce((0, 0, 0), (1.0, 0, -10.0)), ground(ring, 0.0))


def test_random_partial_overlap_agreement():
    rng = np.random.default_rng(21)
    checked = 0
    while checked < 100:
        ang = rng.uniform(-np.pi, np.pi)
        d = rng.uniform(1.5e-3, 19e-3)
        e = d * np.array([math.cos(ang), math.sin(ang)])
        contacts = ground(rim_support_points((0.0, 0.0), e, G))
        poly = support_polygon(contacts)
        q = rng.uniform(-G.peg_radius, G.peg_radius, 2)
        if abs(boundary_distance(poly, q)) < 0.5e-3:
            continue
        push = AppliedForce((q[0], q[1], 0.0), (0.0, 0.0, -10.0))
        assert isinstance(stability_check_3d(push, poly), Static) == wrench_feasible(push, contacts)
        checked += 1
