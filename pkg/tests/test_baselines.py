import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.spatial import cKDTree

from peghole.baselines import (
    LissajousParams,
    SpiralParams,
    first_pass_within,
    lissajous_point,
    spiral_angle,
    spiral_arclength,
    spiral_point,
)

P = SpiralParams()


def test_spiral_origin_and_revolution():
    assert np.allclose(spiral_point(0.0, P), (0, 0))
    # time to reach phi = 2 pi
    t = float(spiral_arclength(2 * np.pi, P.b)) / P.speed
    q = spiral_point(t, P)
    assert math.isclose(np.hypot(*q), P.pitch, rel_tol=1e-9)
    assert math.isclose(math.atan2(q[1], q[0]), 0.0, abs_tol=1e-6)


def test_spiral_scalar_matches_vector():
    ts = np.linspace(0, P.duration, 97)
    vec = spiral_point(ts, P)
    for t, v in zip(ts, vec):
        assert np.allclose(spiral_point(float(t), P), v, atol=1e-15)


def test_radial_gap_audit():
    p = SpiralParams(pitch=1e-3, max_radius=0.06)
    phi = np.linspace(0, 2 * np.pi * 49, 20_000)
    r_now = p.b * phi
    r_next = p.b * (phi + 2 * np.pi)
    assert np.allclose(r_next - r_now, p.pitch)
    # the same gap on the time-parameterized path
    ts = spiral_arclength(phi, p.b) / p.speed
    pts = spiral_point(ts, p)
    ts2 = spiral_arclength(phi + 2 * np.pi, p.b) / p.speed
    pts2 = spiral_point(ts2, p)
    gap = np.hypot(*pts2.T) - np.hypot(*pts.T)
    assert np.allclose(gap, p.pitch, atol=1e-9)


@given(st.floats(0, 60))
def test_spiral_constant_speed(t):
    dt = 1e-4
    a, b = spiral_point(np.array([t, t + dt]), P)
    # chord length matches arc length up to curvature effects
    assert abs(np.hypot(*(b - a)) - P.speed * dt) <= P.speed * dt * 1e-2 or t + dt > P.duration


def test_spiral_clamped_and_exhausted():
    end = spiral_point(P.duration * 2, P)
    assert math.isclose(np.hypot(*end), P.max_radius, rel_tol=1e-9)
    assert P.exhausted(P.duration + 1e-3) and not P.exhausted(P.duration)
    assert math.isclose(P.length, P.duration * P.speed)
    with pytest.raises(ValueError):
        spiral_point(-1.0, P)
    with pytest.raises(ValueError):
        SpiralParams(pitch=0.0)


def test_spiral_angle_inverts_arclength():
    phi = np.linspace(0, 120, 50)
    assert np.allclose(spiral_angle(spiral_arclength(phi, P.b), P.b), phi, atol=1e-9)


def test_lissajous_cases():
    assert np.allclose(lissajous_point(0.0, LissajousParams(phase=0.0)), (0, 0))
    circ = LissajousParams(0.01, 0.01, 0.3, 0.3, np.pi / 2)
    pts = lissajous_point(np.linspace(0, 30, 500), circ)
    assert np.allclose(np.hypot(*pts.T), 0.01)
    with pytest.raises(ValueError):
        lissajous_point(-1.0, circ)


def test_lissajous_3_2_coverage():
    A = 0.01
    p = LissajousParams(A, A, 0.3, 0.2, np.pi / 2)
    t = np.linspace(0, 2 * np.pi / 0.1, 200_001)  # one full period
    tree = cKDTree(lissajous_point(t, p))
    g = np.linspace(-A, A, 41)
    X, Y = np.meshgrid(g, g)
    d, _ = tree.query(np.column_stack([X.ravel(), Y.ravel()]))
    # every point of the amplitude box lies within half an amplitude of the curve
    assert d.max() <= A / 2


def test_first_pass_within():
    fn = lambda t: spiral_point(t, P)  # noqa: E731
    t = first_pass_within(fn, (5e-3, 0.0), 1e-3, P.duration, 0.01)
    assert t is not None and np.hypot(*(spiral_point(t, P) - (5e-3, 0))) <= 1e-3
    assert first_pass_within(fn, (0.05, 0.0), 1e-3, P.duration, 0.05) is None
