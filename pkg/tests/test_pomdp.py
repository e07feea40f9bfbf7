import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from peghole.geom import Chord, PegHoleGeometry, angle_between, chord_from_displacement
from peghole.pomdp import (
    Dirac,
    Empty,
    Inserted,
    K_PROBES,
    MIN_TILT_ANGLE,
    Move,
    PolicyState,
    StaticObs,
    Stay,
    TiltProbe,
    Tilted,
    UniformOverD,
    classify_observation,
    initial_belief,
    next_action,
    reward,
    update_belief,
)
from test_geom import rotate_about

G = PegHoleGeometry()


def test_uniform_over_d():
    b = initial_belief(G)
    assert isinstance(b, UniformOverD)
    assert math.isclose(b.area, math.pi * (19.5e-3 ** 2 - 1e-3 ** 2))
    assert b.density((0.0, 0.0)) == 0.0
    assert b.density((0.03, 0.0)) == 0.0
    assert math.isclose(b.density((0.01, 0.0)) * b.area, 1.0)
    pts = b.sample(10_000, np.random.default_rng(0))
    d = np.hypot(pts[:, 0], pts[:, 1])
    assert len(pts) == 10_000
    assert np.all((d > 1e-3) & (d < 19.5e-3))
    # uniform in area: half the mass lies inside the median radius
    med = math.sqrt((1e-3 ** 2 + 19.5e-3 ** 2) / 2)
    assert abs(np.mean(d < med) - 0.5) < 0.02


def test_reward():
    assert reward((0.0, 0.0), G) == 1.0
    assert reward((5e-3, 0.0), G) == -1.0
    assert reward((1e-3, 0.0), G) == 1.0


def test_update_belief_cases():
    b = initial_belief(G)
    tilted = Tilted(Chord(np.array([0.0, 1.0]), np.zeros(2), 17.32e-3))
    out = update_belief(b, tilted, G)
    assert isinstance(out, Dirac)
    assert np.allclose(out.e, (10e-3, 0.0), atol=1e-5)
    assert update_belief(b, StaticObs(), G) is b
    assert update_belief(Dirac((5e-3, 0)), Inserted(), G) == Dirac((0.0, 0.0))
    assert update_belief(Empty(), Inserted(), G) == Dirac((0.0, 0.0))
    with pytest.raises(ValueError):
        update_belief(Empty(), StaticObs(), G)
    with pytest.raises(TypeError):
        update_belief(b, "tilt", G)


@given(st.floats(1.01e-3, 19.4e-3), st.floats(-math.pi, math.pi))
def test_update_collapses_onto_truth(d, th):
    e = d * np.array([math.cos(th), math.sin(th)])
    out = update_belief(initial_belief(G), Tilted(chord_from_displacement(e, G)), G)
    assert np.allclose(out.e, e, atol=1e-12)


def test_policy_sequence():
    ps = PolicyState.fresh(G)
    assert next_action(ps) == TiltProbe(1)
    ps = ps.observe(StaticObs(), probe=True)
    assert next_action(ps) == TiltProbe(2)
    a = next_action(PolicyState(G, 1, Dirac((10e-3, 0.0))))
    assert isinstance(a, Move)
    assert np.allclose(a.direction, (1, 0))
    assert next_action(PolicyState(G, 1, Dirac((0.5e-3, 0.0)))) == Stay()
    exhausted = PolicyState(G, K_PROBES, initial_belief(G))
    assert next_action(exhausted) == Stay(failed=True)
    assert next_action(PolicyState(G, 0, Empty())) == Stay(failed=True)


def test_primitive_validation():
    with pytest.raises(ValueError):
        TiltProbe(0)
    with pytest.raises(ValueError):
        Move(np.array([1.0, 1.0]))


def _synthetic_tilt(k, d, theta, n=400):
    # peg origin on the surface at distance d from the hinge, rotated about it
    n_hat = np.array([k[1], -k[0]])
    p = d * n_hat
    th = np.linspace(0.0, theta, n)
    return np.array([rotate_about([[0.0, 0.0, 0.0]], k, p, t)[0] for t in th])


def test_classify_synthetic_tilt():
    traj = _synthetic_tilt(np.array([0.0, 1.0]), 5e-3, 0.15)
    o = classify_observation(traj, False, G, axis_height=0.0)
    assert isinstance(o, Tilted)
    assert math.isclose(o.chord.length, 2 * math.sqrt(100 - 25) * 1e-3, rel_tol=1e-9)
    assert np.allclose(o.chord.normal, (1, 0), atol=1e-9)


def test_classify_static_and_inserted():
    still = np.tile([0.0, 0.0, 0.0], (50, 1))
    assert isinstance(classify_observation(still, False, G), StaticObs)
    assert isinstance(classify_observation(still, True, G), Inserted)
    traj = _synthetic_tilt(np.array([0.0, 1.0]), 5e-3, 0.15)
    assert isinstance(classify_observation(traj, True, G), Inserted)


def test_classify_small_swept_angle_is_static():
    small = _synthetic_tilt(np.array([0.0, 1.0]), 9e-3, 0.9 * MIN_TILT_ANGLE)
    assert np.max(np.linalg.norm(small - small[0], axis=1)) > 0.2e-3
    assert isinstance(classify_observation(small, False, G, axis_height=0.0), StaticObs)
    big = _synthetic_tilt(np.array([0.0, 1.0]), 9e-3, 1.1 * MIN_TILT_ANGLE)
    assert isinstance(classify_observation(big, False, G, axis_height=0.0), Tilted)


@given(st.floats(-math.pi, math.pi), st.floats(3e-3, 9.5e-3))
def test_classify_then_update_recovers_direction(phi, d):
    k = np.array([math.cos(phi), math.sin(phi)])
    o = classify_observation(_synthetic_tilt(k, d, 0.17, 120), False, G, axis_height=0.0)
    e_hat = update_belief(initial_belief(G), o, G).e
    e_true = np.array([k[1], -k[0]])
    assert angle_between(e_hat, e_true) < 1e-7
    # equal-radius chord: magnitude is exactly 2 d
    assert math.isclose(float(np.hypot(*e_hat)), 2 * d, rel_tol=1e-7)
