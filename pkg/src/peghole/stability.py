"""Static stability of the peg under a downward push.

Two views are provided: planar moment labeling for the 2D cross-section and
a support-polygon test for the 3D peg resting on the hole surface. A
linear-programming wrench balance check serves as an independent oracle for
both.
"""
from __future__ import annotations

from dataclasses import dataclass
import enum
import math

import numpy as np
from scipy.optimize import linprog

from .geom import Chord, rot2

# closed-set tolerance for point-on-boundary decisions, meters
BOUNDARY_TOL = 1e-9


class FreeFallError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Contact:
    """Frictional point contact. ``position``/``normal`` are 2D or 3D."""

    position: np.ndarray
    normal: np.ndarray
    friction_mu: float = 0.6

    def __post_init__(self):
        n = np.asarray(self.normal, float)
        norm = np.linalg.norm(n)
        if not abs(norm - 1.0) < 1e-9:
            raise ValueError("contact normal must be unit length")
        if self.friction_mu < 0:
            raise ValueError("friction coefficient must be non-negative")
        object.__setattr__(self, "position", np.asarray(self.position, float))
        object.__setattr__(self, "normal", n)


@dataclass(frozen=True, eq=False)
class AppliedForce:
    application_point: np.ndarray
    force: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "application_point", np.asarray(self.application_point, float))
        object.__setattr__(self, "force", np.asarray(self.force, float))

    @property
    def wrench(self) -> np.ndarray:
        """Force and moment about the origin (planar: ``(fx, fy, mz)``)."""
        p, f = self.application_point, self.force
        if len(f) == 2:
            return np.array([f[0], f[1], p[0] * f[1] - p[1] * f[0]])
        return np.concatenate([f, np.cross(p, f)])


@dataclass(frozen=True, eq=False)
class SupportPolygon:
    vertices: np.ndarray  # (n, 2), counter-clockwise
    degenerate: str | None = None  # "point", "segment" or None

    def __len__(self):
        return len(self.vertices)

    def edges(self):
        v = self.vertices
        for i in range(len(v)):
            yield v[i], v[(i + 1) % len(v)]

    def contains(self, q, tol: float = BOUNDARY_TOL) -> bool:
        return _signed_distance(self, np.asarray(q, float)[:2]) <= tol


@dataclass(frozen=True)
class Static:
    pass


@dataclass(frozen=True, eq=False)
class Tilt:
    axis: Chord


class MomentLabel(enum.Enum):
    PLUS = "+"
    MINUS = "-"
    MIXED = "+-"


class PlanarVerdict(enum.Enum):
    STATIC = "static"
    TILT_LEFT = "tilt_left"
    TILT_RIGHT = "tilt_right"


def friction_cone_halfangle(mu: float) -> float:
    """Aperture of the moment-labeling cone, ``2 atan(mu)``.

    The name follows the planar labeling literature; the physical cone
    half-angle is ``atan(mu)``.
    """
    if mu < 0:
        raise ValueError("mu must be non-negative")
    return 2.0 * math.atan(mu)


def _cross2(a, b) -> float:
    return a[0] * b[1] - a[1] * b[0]


def planar_cone_edges(contact: Contact) -> list[np.ndarray]:
    half = math.atan(contact.friction_mu)
    if half == 0.0:
        return [contact.normal.copy()]
    return [rot2(half) @ contact.normal, rot2(-half) @ contact.normal]


def moment_label_classify(point, contacts, tol: float = 1e-12) -> MomentLabel:
    """Label a point by the sign of the moments the contact wrenches can make about it.

    Moments are linear in the force, so checking the cone edges covers the
    whole cone. Zero moments count toward both labels (closed regions); a
    point where every edge gives zero moment is reported as MIXED.
    """
    q = np.asarray(point, float)
    moments = []
    for c in contacts:
        arm = c.position - q
        for f in planar_cone_edges(c):
            moments.append(_cross2(arm, f))
    m = np.array(moments)
    scale = max(1.0, float(np.max(np.abs([np.linalg.norm(c.position - q) for c in contacts]))))
    pos = np.all(m >= -tol * scale)
    neg = np.all(m <= tol * scale)
    if pos and neg:
        return MomentLabel.MIXED
    if pos:
        return MomentLabel.PLUS
    if neg:
        return MomentLabel.MINUS
    return MomentLabel.MIXED


def _feasible(G: np.ndarray, target: np.ndarray) -> bool:
    if G.shape[1] == 0:
        return bool(np.allclose(target, 0.0))
    res = linprog(
        np.zeros(G.shape[1]),
        A_eq=G,
        b_eq=target,
        bounds=(0, None),
        method="highs",
    )
    return res.status == 0


def planar_wrench_feasible(applied: AppliedForce, contacts) -> bool:
    cols = []
    for c in contacts:
        for f in planar_cone_edges(c):
            cols.append([f[0], f[1], _cross2(c.position, f)])
    G = np.array(cols, float).T if cols else np.zeros((3, 0))
    return _feasible(G, -applied.wrench)


def planar_static_check(force: AppliedForce, contacts) -> PlanarVerdict:
    """Whether a planar peg stays put under ``force`` or tips left/right.

    When unbalanced, the peg pivots on the contact nearest the force's line
    of action; a clockwise moment about it tips the peg to the right.
    """
    contacts = list(contacts)
    if not contacts:
        raise FreeFallError("free fall")
    if force.force[1] >= 0:
        raise ValueError("probe force must point downward")
    if planar_wrench_feasible(force, contacts):
        return PlanarVerdict.STATIC
    f = force.force / np.linalg.norm(force.force)
    q = force.application_point

    def line_distance(c):
        return abs(_cross2(c.position - q, f))

    pivot = min(contacts, key=line_distance)
    moment = _cross2(q - pivot.position, force.force)
    return PlanarVerdict.TILT_RIGHT if moment < 0 else PlanarVerdict.TILT_LEFT


def planar_resting_contacts(peg_center: float, peg_radius: float, hole_center: float,
                            hole_radius: float, mu: float = 0.6) -> list[Contact]:
    """Contacts of a planar peg whose bottom straddles one edge of a slot.

    The peg bottom spans ``[peg_center - r, peg_center + r]`` on the surface
    ``y = 0``; the slot occupies ``(hole_center - R, hole_center + R)``.
    """
    lo, hi = peg_center - peg_radius, peg_center + peg_radius
    hole_lo, hole_hi = hole_center - hole_radius, hole_center + hole_radius
    up = np.array([0.0, 1.0])
    if hole_center > peg_center:
        xs = [lo, hole_lo] if hole_lo > lo else []
    else:
        xs = [hole_hi, hi] if hole_hi < hi else []
    return [Contact(np.array([x, 0.0]), up, mu) for x in xs]


def convex_hull_2d(points, tol: float = 1e-12) -> np.ndarray:
    """Monotone-chain hull, counter-clockwise, collinear points dropped."""
    pts = np.unique(np.round(np.asarray(points, float)[:, :2], 15), axis=0)
    if len(pts) <= 2:
        return pts
    pts = sorted(map(tuple, pts))

    def half(seq):
        out = []
        for p in seq:
            while len(out) >= 2:
                a, b = out[-2], out[-1]
                if (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) <= tol * tol:
                    out.pop()
                else:
                    break
            out.append(p)
        return out

    lower = half(pts)
    upper = half(reversed(pts))
    hull = lower[:-1] + upper[:-1]
    return np.array(hull)


def support_polygon(contacts) -> SupportPolygon:
    contacts = list(contacts)
    if not contacts:
        raise ValueError("need at least one contact")
    pts = np.array([c.position[:2] for c in contacts])
    hull = convex_hull_2d(pts)
    if len(hull) == 1:
        return SupportPolygon(hull, "point")
    if len(hull) == 2:
        return SupportPolygon(hull, "segment")
    return SupportPolygon(hull, None)


def _segment_distance(q, a, b) -> float:
    ab = b - a
    t = np.clip((q - a) @ ab / (ab @ ab), 0.0, 1.0)
    return float(np.hypot(*(q - (a + t * ab))))


def _signed_distance(polygon: SupportPolygon, q) -> float:
    """Distance to the hull boundary, negative inside."""
    v = polygon.vertices
    if polygon.degenerate == "point":
        return float(np.hypot(*(q - v[0])))
    if polygon.degenerate == "segment":
        return _segment_distance(q, v[0], v[1])
    dist = min(_segment_distance(q, a, b) for a, b in polygon.edges())
    inside = all(_cross2(b - a, q - a) >= 0 for a, b in polygon.edges())
    return -dist if inside else dist


def boundary_distance(polygon: SupportPolygon, q) -> float:
    """Signed distance from ``q`` to the support polygon boundary (negative inside)."""
    return _signed_distance(polygon, np.asarray(q, float)[:2])


def stability_check_3d(force: AppliedForce, polygon: SupportPolygon, tol: float = BOUNDARY_TOL):
    """Support-polygon test for a downward push.

    Returns :class:`Static` when the push projects inside (or onto) the
    polygon, otherwise :class:`Tilt` about the polygon edge nearest to the
    projection. The edge is oriented counter-clockwise, so
    ``rot2(-pi/2) @ axis.direction`` points out of the polygon, toward the
    side that drops.
    """
    if force.force[2] >= 0:
        raise ValueError("probe force must point downward")
    if len(polygon) == 0:
        raise ValueError("empty support polygon")
    q = force.application_point[:2]
    if _signed_distance(polygon, q) <= tol:
        return Static()
    v = polygon.vertices
    if polygon.degenerate == "point":
        return Tilt(_pivot_axis(v[0], q))
    if polygon.degenerate == "segment":
        edges = [(v[0], v[1]), (v[1], v[0])]
    else:
        edges = list(polygon.edges())
    a, b = min(edges, key=lambda ab: (_segment_distance(q, *ab), -_cross2(ab[1] - ab[0], q - ab[0])))
    ab = b - a
    t = (q - a) @ ab / (ab @ ab)
    if polygon.degenerate == "segment" and not 0.0 < t < 1.0:
        return Tilt(_pivot_axis(a if t <= 0 else b, q))
    length = float(np.hypot(*ab))
    return Tilt(Chord(ab / length, (a + b) / 2.0, length))


def _pivot_axis(v, q) -> Chord:
    d = q - v
    k = rot2(np.pi / 2) @ (d / np.hypot(*d))
    return Chord(k, v.copy(), 0.0)


def cone_edges_3d(contact: Contact, m: int = 8) -> np.ndarray:
    """Unit-normal-component edge rays of a linearized friction cone, shape (m, 3)."""
    n = contact.normal
    t1 = np.cross(n, [1.0, 0.0, 0.0])
    if np.linalg.norm(t1) < 1e-6:
        t1 = np.cross(n, [0.0, 1.0, 0.0])
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(n, t1)
    ang = 2 * np.pi * np.arange(m) / m
    return n + contact.friction_mu * (np.outer(np.cos(ang), t1) + np.outer(np.sin(ang), t2))


def wrench_feasible(applied: AppliedForce, contacts, *, edges: int = 8,
                    gravity: tuple[float, np.ndarray] | None = None, g: float = 9.81) -> bool:
    """Whether contact forces inside linearized friction cones can balance the load.

    ``gravity`` optionally adds the peg weight as ``(mass, center_of_mass)``.
    """
    if edges < 8:
        raise ValueError("use at least 8 cone edges")
    w = applied.wrench.copy()
    if gravity is not None:
        mass, com = gravity
        w += AppliedForce(np.asarray(com, float), np.array([0.0, 0.0, -mass * g])).wrench
    cols = []
    for c in contacts:
        for f in cone_edges_3d(c, edges):
            cols.append(np.concatenate([f, np.cross(c.position, f)]))
    G = np.array(cols).T if cols else np.zeros((6, 0))
    # scale moment rows to force units so tolerances are comparable
    scale = max(1e-3, float(np.max(np.abs([c.position for c in contacts]))) if cols else 1.0)
    G = G.copy()
    G[3:] /= scale
    target = -w
    target[3:] /= scale
    return _feasible(G, target)
