"""Belief, primitives and the search policy over the displacement error."""
from __future__ import annotations

from dataclasses import dataclass, replace
import math
import warnings

import numpy as np

from .geom import (
    Chord,
    GeometryError,
    NoTiltDetected,
    PegHoleGeometry,
    TILT_FLOOR,
    displacement_from_chord,
    fit_tilt_axis,
)

K_PROBES = 6
T_ACTION = 0.02  # one FSM period at 50 Hz
#: tilts sweeping less than this leave the axis direction unidentifiable
MIN_TILT_ANGLE = math.radians(4.5)


# -- action primitives -------------------------------------------------------

@dataclass(frozen=True)
class TiltProbe:
    index: int  # 1..K

    def __post_init__(self):
        if self.index < 1:
            raise ValueError("probe index starts at 1")


@dataclass(frozen=True, eq=False)
class Move:
    direction: np.ndarray
    duration: float = T_ACTION

    def __post_init__(self):
        n = np.asarray(self.direction, float)
        if not abs(np.linalg.norm(n) - 1.0) < 1e-9:
            raise ValueError("move direction must be unit length")
        object.__setattr__(self, "direction", n)


@dataclass(frozen=True)
class Stay:
    failed: bool = False


# -- observation primitives --------------------------------------------------

@dataclass(frozen=True)
class StaticObs:
    pass


@dataclass(frozen=True, eq=False)
class Tilted:
    chord: Chord


@dataclass(frozen=True)
class Inserted:
    pass


# -- beliefs -----------------------------------------------------------------

@dataclass(frozen=True)
class UniformOverD:
    geom: PegHoleGeometry

    @property
    def area(self) -> float:
        lo, hi = self.geom.overlap_bounds
        return math.pi * (hi * hi - lo * lo)

    def density(self, e) -> float:
        return 1.0 / self.area if self.geom.in_partial_overlap(e) else 0.0

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        # inverse-CDF sampling in radius for a uniform annulus
        lo, hi = self.geom.overlap_bounds
        rho = np.sqrt(rng.uniform(lo * lo, hi * hi, n))
        ang = rng.uniform(-np.pi, np.pi, n)
        pts = np.column_stack([rho * np.cos(ang), rho * np.sin(ang)])
        # guard the open interval
        keep = (rho > lo) & (rho < hi)
        return pts[keep]


@dataclass(frozen=True, eq=False)
class Dirac:
    e: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "e", np.asarray(self.e, float).reshape(2))

    def __eq__(self, other):
        return isinstance(other, Dirac) and np.array_equal(self.e, other.e)


@dataclass(frozen=True)
class Empty:
    pass


def initial_belief(geom: PegHoleGeometry) -> UniformOverD:
    return UniformOverD(geom)


def reward(e, geom: PegHoleGeometry) -> float:
    return 1.0 if geom.in_goal(e) else -1.0


def update_belief(b, o, geom: PegHoleGeometry):
    """Deterministic belief update.

    A tilt collapses the belief onto the displacement implied by the chord;
    a static probe leaves it unchanged; insertion puts it at the origin.
    """
    if isinstance(o, Inserted):
        return Dirac(np.zeros(2))
    if isinstance(b, Empty):
        raise ValueError("cannot update an empty belief")
    if isinstance(o, Tilted):
        return Dirac(displacement_from_chord(o.chord, geom))
    if isinstance(o, StaticObs):
        return b
    raise TypeError(f"unknown observation {o!r}")


# -- policy ------------------------------------------------------------------

@dataclass(frozen=True)
class PolicyState:
    geom: PegHoleGeometry
    probes_tried: int = 0
    belief: object = None
    last_observation: object = None

    @classmethod
    def fresh(cls, geom: PegHoleGeometry) -> "PolicyState":
        return cls(geom, 0, initial_belief(geom), None)

    def observe(self, o, *, probe: bool = False) -> "PolicyState":
        """Record an observation; ``probe`` marks it as the outcome of a tilt probe."""
        n = self.probes_tried + (1 if probe else 0)
        return replace(self, probes_tried=n, belief=update_belief(self.belief, o, self.geom),
                       last_observation=o)


def next_action(ps: PolicyState, K: int = K_PROBES, T_a: float = T_ACTION):
    b = ps.belief
    if isinstance(b, Dirac):
        if ps.geom.in_goal(b.e):
            return Stay()
        return Move(b.e / float(np.hypot(*b.e)), T_a)
    if isinstance(b, UniformOverD):
        if ps.probes_tried < K:
            return TiltProbe(ps.probes_tried + 1)
        return Stay(failed=True)
    return Stay(failed=True)


def classify_observation(trajectory, inserted_flag: bool, geom: PegHoleGeometry, *,
                         axis_height: float | None = None, floor: float = TILT_FLOOR,
                         min_angle: float = MIN_TILT_ANGLE):
    """Turn one probe window of peg-origin positions into an observation.

    The chord length follows from the distance ``d`` between the fitted axis
    and the peg axis at probe start: ``l = 2 sqrt(r^2 - d^2)``. A motion that
    clears the displacement ``floor`` but sweeps less than ``min_angle`` is
    reported as static, since the horizontal part of the motion that fixes
    the axis direction is second order in the angle.
    """
    if inserted_flag:
        return Inserted()
    pts = np.asarray(trajectory, float)
    try:
        fit = fit_tilt_axis(pts, axis_height=axis_height, floor=floor)
    except NoTiltDetected:
        return StaticObs()
    except GeometryError as exc:
        warnings.warn(f"tilt axis fit failed, treating probe as static: {exc}")
        return StaticObs()
    if fit.angle < min_angle:
        return StaticObs()
    r = geom.peg_radius
    k = fit.direction
    rel = pts[0, :2] - fit.point
    d = abs(k[0] * rel[1] - k[1] * rel[0])
    d = min(d, r)
    return Tilted(Chord(k, fit.point, 2.0 * math.sqrt(r * r - d * d)))
