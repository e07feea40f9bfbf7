"""Planar and 3D geometry used throughout the package.

Conventions
-----------
* Lengths are in meters, angles in radians.
* The displacement error ``e`` is the horizontal vector from the peg axis to
  the hole axis.
* A :class:`Chord` direction ``k`` is oriented so that ``rot2(-pi/2) @ k``
  points from the peg toward the hole; a tilt about the chord is then a
  positive (right-hand) rotation about ``k``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np
from scipy.optimize import least_squares

#: gap kept between the outer edge of the partial-overlap set and ``2 r``
OVERLAP_MARGIN = 0.5e-3
#: total peg-origin displacement below which a probe is declared motionless
TILT_FLOOR = 0.2e-3


class GeometryError(ValueError):
    pass


class NoTiltDetected(GeometryError):
    pass


class Coincident:
    """Marker returned by :func:`circle_intersection` for identical circles."""

    def __repr__(self):
        return "COINCIDENT"


COINCIDENT = Coincident()


@dataclass(frozen=True)
class PegHoleGeometry:
    peg_radius: float = 10e-3
    clearance: float = 1e-3
    peg_length: float = 60e-3
    hole_depth: float = 20e-3

    def __post_init__(self):
        if not 0 < self.clearance < self.peg_radius:
            raise ValueError("clearance must satisfy 0 < clearance < peg_radius")
        if not self.peg_length > self.hole_depth > 0:
            raise ValueError("need peg_length > hole_depth > 0")

    @property
    def hole_radius(self) -> float:
        return self.peg_radius + self.clearance

    @property
    def overlap_bounds(self) -> tuple[float, float]:
        """Open interval of ``|e|`` for which the peg partially overlaps the hole."""
        return self.clearance, 2 * self.peg_radius - OVERLAP_MARGIN

    def in_partial_overlap(self, e) -> bool:
        lo, hi = self.overlap_bounds
        return lo < float(np.hypot(*np.asarray(e, float)[:2])) < hi

    def in_goal(self, e) -> bool:
        return float(np.hypot(*np.asarray(e, float)[:2])) <= self.clearance


@dataclass(frozen=True, eq=False)
class Chord:
    """Intersection line between the peg rim and the hole rim."""

    direction: np.ndarray
    point: np.ndarray
    length: float

    def __post_init__(self):
        k = np.asarray(self.direction, float)
        n = np.linalg.norm(k)
        if not abs(n - 1.0) < 1e-9:
            raise GeometryError(f"chord direction must be unit length, got norm {n}")
        object.__setattr__(self, "direction", k)
        object.__setattr__(self, "point", np.asarray(self.point, float))
        if self.length < 0:
            raise GeometryError("chord length must be non-negative")

    @property
    def normal(self) -> np.ndarray:
        """Unit vector pointing from the peg toward the hole."""
        return rot2(-np.pi / 2) @ self.direction


def _euler_to_matrix(euler) -> np.ndarray:
    roll, pitch, yaw = euler
    cr, sr = math.cos(roll), math.sin(roll)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    return np.array([
        [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
        [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
        [-sp, cp * sr, cp * cr],
    ])


def _matrix_to_euler(R) -> np.ndarray:
    pitch = -math.asin(max(-1.0, min(1.0, R[2, 0])))
    roll = math.atan2(R[2, 1], R[2, 2])
    yaw = math.atan2(R[1, 0], R[0, 0])
    return np.array([roll, pitch, yaw])


@dataclass(frozen=True, eq=False)
class RigidPose:
    """Position plus Z-Y-X Euler angles stored as ``(roll, pitch, yaw)``.

    The rotation matrix is ``Rz(yaw) @ Ry(pitch) @ Rx(roll)``.
    """

    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    euler: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, float).reshape(3))
        object.__setattr__(self, "euler", np.asarray(self.euler, float).reshape(3))

    @classmethod
    def from_matrix(cls, position, R) -> "RigidPose":
        return cls(position, _matrix_to_euler(np.asarray(R, float)))

    @property
    def rotation(self) -> np.ndarray:
        return _euler_to_matrix(self.euler)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.position, self.euler])

    def transform(self, point) -> np.ndarray:
        return self.position + self.rotation @ np.asarray(point, float)


def rot2(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def circle_intersection(c1, r1: float, c2, r2: float, tol: float = 1e-12):
    """Intersection points of two circles.

    Returns a tuple of zero, one (tangency) or two points, or
    :data:`COINCIDENT` when both circles are the same.
    """
    if r1 <= 0 or r2 <= 0:
        raise ValueError("radii must be positive")
    c1 = np.asarray(c1, float)
    c2 = np.asarray(c2, float)
    delta = c2 - c1
    d = float(np.hypot(*delta))
    scale = max(r1, r2)
    if d <= tol * scale:
        return COINCIDENT if abs(r1 - r2) <= tol * scale else ()
    if d > r1 + r2 + tol * scale or d < abs(r1 - r2) - tol * scale:
        return ()
    a = (d * d + r1 * r1 - r2 * r2) / (2 * d)
    h2 = r1 * r1 - a * a
    u = delta / d
    mid = c1 + a * u
    if abs(d - (r1 + r2)) <= tol * scale or abs(d - abs(r1 - r2)) <= tol * scale or h2 <= 0:
        return (mid,)
    h = math.sqrt(h2)
    perp = np.array([-u[1], u[0]])
    return (mid + h * perp, mid - h * perp)


def chord_from_displacement(e, geom: PegHoleGeometry, *, center=(0.0, 0.0), strict: bool = True) -> Chord:
    """Chord seen when the hole sits at ``center + e`` relative to the peg.

    Both rims are treated as radius ``geom.peg_radius`` circles, matching
    :func:`displacement_from_chord`. With ``strict`` the displacement must lie
    in the partial-overlap set.
    """
    e = np.asarray(e, float)
    center = np.asarray(center, float)
    r = geom.peg_radius
    d = float(np.hypot(*e))
    if strict and not geom.in_partial_overlap(e):
        raise GeometryError(f"no partial overlap for |e| = {d:.6g} m")
    if d > 2 * r:
        raise GeometryError(f"no partial overlap for |e| = {d:.6g} m")
    length = 2.0 * math.sqrt(max(r * r - d * d / 4.0, 0.0))
    if d == 0.0:
        return Chord(np.array([0.0, 1.0]), center.copy(), length)
    k = rot2(np.pi / 2) @ (e / d)
    return Chord(k, center + e / 2.0, length)


def displacement_from_chord(chord: Chord, geom: PegHoleGeometry) -> np.ndarray:
    r = geom.peg_radius
    l = chord.length
    if l > 2 * r * (1 + 1e-12):
        raise GeometryError(f"invalid chord length {l:.6g} m for peg radius {r:.6g} m")
    magnitude = 2.0 * math.sqrt(max(r * r - l * l / 4.0, 0.0))
    return magnitude * (rot2(-np.pi / 2) @ chord.direction)


@dataclass(frozen=True, eq=False)
class TiltAxisFit:
    direction: np.ndarray  # unit k in the horizontal plane
    point: np.ndarray      # horizontal point on the axis
    height: float          # z of the axis
    radius: float          # distance of the tracked point from the axis
    angle: float           # swept angle about ``direction``, >= 0
    rms: float             # residual RMS of the circle fit, meters

    def chord(self, length: float) -> Chord:
        return Chord(self.direction, self.point, length)


def fit_tilt_axis(trajectory, axis_height: float | None = None, floor: float = TILT_FLOOR) -> TiltAxisFit:
    """Recover a horizontal rotation axis from samples of a rotating point.

    The axis direction comes from an orthogonal least-squares line through
    the horizontal projections of the samples. The axis location and height
    come from a geometric circle fit in the vertical plane spanned by that
    line; pass ``axis_height`` when the height is known (the contact plane),
    which keeps the fit well conditioned for short arcs. ``direction`` is
    signed so the observed motion is a positive rotation about it.
    """
    pts = np.asarray(trajectory, float)
    if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) < 3:
        raise GeometryError("need at least 3 samples of 3D positions")
    if np.max(np.linalg.norm(pts - pts[0], axis=1)) < floor:
        raise NoTiltDetected("no tilt detected")

    xy = pts[:, :2]
    mean_xy = xy.mean(axis=0)
    _, _, vt = np.linalg.svd(xy - mean_xy, full_matrices=False)
    u = vt[0]
    s = (xy - mean_xy) @ u
    order = np.arange(len(s)) - (len(s) - 1) / 2.0
    if s @ order < 0:
        u, s = -u, -s
    z = pts[:, 2]

    if axis_height is None:
        A = np.column_stack([2 * s, 2 * z, np.ones_like(s)])
        sc, zc, c = np.linalg.lstsq(A, s * s + z * z, rcond=None)[0]
        rho = math.sqrt(max(c + sc * sc + zc * zc, 0.0))

        def resid(x):
            return np.hypot(s - x[0], z - x[1]) - x[2]

        sol = least_squares(resid, [sc, zc, rho], method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
        sc, zc, rho = sol.x
    else:
        zc = float(axis_height)
        w = z - zc
        A = np.column_stack([2 * s, np.ones_like(s)])
        sc, c = np.linalg.lstsq(A, s * s + w * w, rcond=None)[0]
        rho = math.sqrt(max(c + sc * sc, 0.0))

        def resid(x):
            return np.hypot(s - x[0], w) - x[1]

        sol = least_squares(resid, [sc, rho], method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
        sc, rho = sol.x
    if not np.all(np.isfinite([sc, zc, rho])):
        raise GeometryError("circle fit diverged")
    rms = float(np.sqrt(np.mean((np.hypot(s - sc, z - zc) - abs(rho)) ** 2)))

    phi = np.unwrap(np.arctan2(z - zc, s - sc))
    swept = float(np.polyfit(order, phi, 1)[0] * (len(phi) - 1))
    k0 = rot2(np.pi / 2) @ u
    # the (s, z) plane has normal u x z = -k0, so counter-clockwise there is
    # a negative rotation about k0
    k = -k0 if swept > 0 else k0
    return TiltAxisFit(k, mean_xy + sc * u, float(zc), float(abs(rho)), abs(swept), rms)


def angle_between(a, b) -> float:
    """Unsigned angle between two planar vectors, radians."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    return math.atan2(abs(a[0] * b[1] - a[1] * b[0]), float(a @ b))
