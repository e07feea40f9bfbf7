import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from peghole.geom import (
    COINCIDENT,
    Chord,
    GeometryError,
    NoTiltDetected,
    PegHoleGeometry,
    RigidPose,
    angle_between,
    chord_from_displacement,
    circle_intersection,
    displacement_from_chord,
    fit_tilt_axis,
    rot2,
)

G = PegHoleGeometry()
R = G.peg_radius

angles = st.floats(-math.pi, math.pi, allow_nan=False)
in_d = st.floats(1.001e-3, 19.49e-3)


def rotate_about(points, k, p, theta):
    """Rodrigues rotation of 3D points about the horizontal axis (k, p, z=0)."""
    k3 = np.array([k[0], k[1], 0.0])
    p3 = np.array([p[0], p[1], 0.0])
    v = np.asarray(points, float) - p3
    c, s = math.cos(theta), math.sin(theta)
    out = v * c + np.cross(k3, v) * s + np.outer(v @ k3, k3) * (1 - c)
    return out + p3


def test_rot2_cases():
    assert np.allclose(rot2(0) @ [1, 0], [1, 0])
    assert np.allclose(rot2(np.pi / 2) @ [1, 0], [0, 1])
    assert np.allclose(rot2(-np.pi / 2) @ [0, 1], [1, 0])


@given(angles, angles)
def test_rot2_group(a, b):
    assert np.allclose(rot2(a) @ rot2(b), rot2(a + b), atol=1e-12)
    assert np.isclose(np.linalg.det(rot2(a)), 1.0)


def test_circle_intersection_cases():
    (p,) = circle_intersection((0, 0), 0.01, (0.02, 0), 0.01)
    assert np.allclose(p, (0.01, 0))
    pts = circle_intersection((0, 0), 0.01, (0.01, 0), 0.01)
    assert len(pts) == 2
    ys = sorted(q[1] for q in pts)
    # substitute the frozen analytic solution back into both circle equations
    assert np.allclose([q[0] for q in pts], 0.005)
    assert np.allclose(ys, [-0.008660254037844387, 0.008660254037844387])
    for q in pts:
        assert math.isclose(np.hypot(*q), 0.01)
        assert math.isclose(np.hypot(q[0] - 0.01, q[1]), 0.01)
    assert circle_intersection((0, 0), 0.01, (0.03, 0), 0.01) == ()
    assert circle_intersection((0, 0), 0.01, (0, 0), 0.01) is COINCIDENT
    assert circle_intersection((0, 0), 0.01, (0, 0), 0.005) == ()
    with pytest.raises(ValueError):
        circle_intersection((0, 0), 0.0, (1, 0), 1.0)


@given(st.floats(-0.02, 0.02), st.floats(-0.02, 0.02), st.floats(1e-3, 0.02), st.floats(1e-3, 0.02))
def test_circle_intersection_points_lie_on_both(x, y, r1, r2):
    pts = circle_intersection((0, 0), r1, (x, y), r2)
    if pts is COINCIDENT:
        return
    for p in pts:
        assert abs(np.hypot(*p) - r1) < 1e-9
        assert abs(np.hypot(p[0] - x, p[1] - y) - r2) < 1e-9


def test_chord_from_displacement_length():
    c = chord_from_displacement((0.01, 0.0), G)
    assert math.isclose(c.length, 0.017320508075688773)
    # independent: distance between the two circle intersection points
    a, b = circle_intersection((0, 0), R, (0.01, 0), R)
    assert math.isclose(c.length, float(np.hypot(*(a - b))))
    assert np.allclose(c.direction, (0, 1))
    assert np.allclose(c.normal, (1, 0))
    assert np.allclose(c.point, (0.005, 0))


def test_chord_limits():
    near_tangent = chord_from_displacement((2 * R, 0.0), G, strict=False)
    assert near_tangent.length < 1e-6
    aligned = chord_from_displacement((0.0, 0.0), G, strict=False)
    assert math.isclose(aligned.length, 2 * R)
    with pytest.raises(GeometryError):
        chord_from_displacement((0.0, 0.0), G)
    with pytest.raises(GeometryError):
        chord_from_displacement((0.03, 0.0), G, strict=False)


def test_displacement_from_chord_cases():
    e = displacement_from_chord(Chord(np.array([0.0, 1.0]), np.zeros(2), 0.017320508075688773), G)
    assert np.allclose(e, (0.01, 0.0), atol=1e-12)
    assert np.allclose(displacement_from_chord(Chord(np.array([0.0, 1.0]), np.zeros(2), 2 * R), G), 0)
    assert np.allclose(displacement_from_chord(Chord(np.array([1.0, 0.0]), np.zeros(2), 0.0), G),
                       (0.0, -0.02))
    with pytest.raises(GeometryError):
        displacement_from_chord(Chord(np.array([1.0, 0.0]), np.zeros(2), 0.03), G)


def test_chord_rejects_non_unit_direction():
    with pytest.raises(GeometryError):
        Chord(np.array([1.0, 1.0]), np.zeros(2), 0.01)


@given(in_d, angles)
def test_round_trip_property(d, th):
    e = d * np.array([math.cos(th), math.sin(th)])
    c = chord_from_displacement(e, G)
    back = displacement_from_chord(c, G)
    assert angle_between(e, back) < 1e-9
    assert abs(np.hypot(*back) - d) < 1e-12
    # the chord normal always points at the hole
    assert c.normal @ e > 0


@given(st.floats(1e-4, 0.0199), st.floats(-math.pi, math.pi))
def test_reverse_round_trip(length, phi):
    k = np.array([math.cos(phi), math.sin(phi)])
    e = displacement_from_chord(Chord(k, np.zeros(2), length), G)
    back = chord_from_displacement(e, G, strict=False)
    assert abs(back.length - length) < 1e-9
    assert angle_between(back.direction, k) < 1e-9


def test_geometry_sets():
    assert G.overlap_bounds == (1e-3, 19.5e-3)
    assert G.in_goal((1e-3, 0.0))
    assert not G.in_partial_overlap((1e-3, 0.0))
    assert G.in_partial_overlap((10e-3, 0.0))
    with pytest.raises(ValueError):
        PegHoleGeometry(clearance=0.0)


def test_rigid_pose_round_trip():
    p = RigidPose([0.1, 0.2, 0.3], [0.1, -0.2, 0.3])
    R3 = p.rotation
    assert np.allclose(R3 @ R3.T, np.eye(3))
    q = RigidPose.from_matrix(p.position, R3)
    assert np.allclose(q.euler, p.euler)
    assert np.allclose(p.transform([0, 0, 0]), p.position)


def test_fit_recovers_exact_rotation():
    k, p = np.array([0.0, 1.0]), np.array([0.005, 0.0])
    th = np.linspace(0.0, 0.05, 60)
    pts = np.array([rotate_about([[0.01, 0.0, 0.05]], k, p, t)[0] for t in th])
    fit = fit_tilt_axis(pts)
    assert angle_between(fit.direction, k) < 1e-6
    assert np.linalg.norm(fit.point - p) < 1e-9
    assert abs(fit.height) < 1e-9
    assert math.isclose(fit.angle, 0.05, rel_tol=1e-6)
    fit2 = fit_tilt_axis(pts, axis_height=0.0)
    assert np.allclose(fit2.direction, k, atol=1e-9)
    assert abs(fit2.point[0] - p[0]) < 1e-9


def test_fit_degenerate_inputs():
    with pytest.raises(NoTiltDetected):
        fit_tilt_axis(np.tile([0.01, 0.0, 0.05], (20, 1)))
    with pytest.raises(GeometryError):
        fit_tilt_axis(np.zeros((2, 3)))


def test_fit_under_noise():
    rng = np.random.default_rng(3)
    k, p = np.array([0.0, 1.0]), np.array([0.005, 0.0])
    th = np.linspace(0.0, 0.05, 200)
    clean = np.array([rotate_about([[0.01, 0.0, 0.05]], k, p, t)[0] for t in th])
    errs = []
    for _ in range(20):
        noisy = clean + rng.uniform(-1e-5, 1e-5, clean.shape)
        errs.append(math.degrees(angle_between(fit_tilt_axis(noisy).direction, k)))
    assert max(errs) < 1.0


@settings(max_examples=40)
@given(angles, st.floats(4e-3, 9e-3), st.floats(0.08, 0.17))
def test_fit_sign_convention(phi, d, theta):
    # the fitted direction is the one about which the motion is positive
    k = np.array([math.cos(phi), math.sin(phi)])
    n = rot2(-np.pi / 2) @ k
    p = d * n
    th = np.linspace(0.0, theta, 80)
    pts = np.array([rotate_about([[0.0, 0.0, 0.0]], k, p, t)[0] for t in th])
    fit = fit_tilt_axis(pts, axis_height=0.0)
    assert angle_between(fit.direction, k) < 1e-7


def test_angle_between():
    assert angle_between((1, 0), (2, 0)) == 0.0
    assert math.isclose(angle_between((1, 0), (0, 3)), math.pi / 2)
    assert math.isclose(angle_between((1, 0), (-1, 0)), math.pi)
