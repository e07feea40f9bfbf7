"""Quasi-static world model of a round peg above a round hole.

The peg is a directly actuated rigid body. Each 1 kHz step resolves the
commanded body wrench (force and torque about the peg origin, which sits at
the center of the peg's bottom face) into motion according to a contact
mode:

* ``free``: first-order (viscous) motion along the wrench.
* ``surface``: resting upright on the hole block. If the center of pressure
  is inside the support polygon the peg stays put or slides under Coulomb
  friction; otherwise it starts to tilt about the nearest polygon edge.
* ``tilt``: rotation about a horizontal hinge on the surface at a capped
  rate, driven by the moment about the hinge.
* ``insert``: vertical descent inside the hole with the horizontal offset
  funneled toward the hole axis as depth grows.

The hot loop lives in numba-compiled kernels operating on a flat state
vector; :class:`WorldState` wraps that vector.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np
from numba import njit

from .geom import PegHoleGeometry, RigidPose, _euler_to_matrix
from .stability import Contact

# state vector layout
_P = 0          # peg origin position (3)
_EUL = 3        # roll, pitch, yaw (3)
_TW = 6         # linear and angular velocity (6)
_MODE = 12
_TH = 13        # tilt angle
_U = 14         # upright origin position on the surface (2)
_K = 16         # hinge direction (2)
_H = 18         # hinge point (2)
_DEPTH = 20
_CLOCK = 21
_ODO = 22       # path length of the peg origin
_EXT = 23       # external wrench estimate (6)
_YAW = 29       # yaw kept while resting upright
NSTATE = 30

FREE, SURFACE, TILT, INSERT = 0, 1, 2, 3
MODE_NAMES = {FREE: "free", SURFACE: "surface", TILT: "tilt", INSERT: "insert"}

# kernel status codes
OK = 0
BAD_WRENCH = 1
EULER_SINGULAR = 2

EULER_LIMIT = math.pi / 2 - 0.1


class EulerSingularity(ArithmeticError):
    pass


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1e-3
    mu: float = 0.6
    rim_step_deg: float = 5.0
    seed: int = 0
    noise: float = 0.0              # half-width of uniform position noise, m
    b_free: float = 200.0           # N s/m
    b_rot: float = 0.05             # N m s/rad
    b_slide: float = 500.0          # N s/m
    b_insert: float = 500.0         # N s/m
    c_tilt: float = 0.01            # N m s/rad
    tilt_rate: float = 0.5          # rad/s
    tilt_max: float = math.radians(10.0)

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.mu < 0:
            raise ValueError("mu must be non-negative")
        if self.noise < 0:
            raise ValueError("noise amplitude must be non-negative")

    def kernel_params(self) -> np.ndarray:
        return np.array([
            self.dt, self.mu, math.radians(self.rim_step_deg), self.b_free, self.b_rot,
            self.b_slide, self.b_insert, self.c_tilt, self.tilt_rate, self.tilt_max,
        ])


def _geom_params(geom: PegHoleGeometry) -> np.ndarray:
    return np.array([geom.peg_radius, geom.clearance, geom.hole_depth])


# ---------------------------------------------------------------------------
# numba kernels
# ---------------------------------------------------------------------------

@njit(cache=True)
def _rotmat(roll, pitch, yaw):
    cr, sr = math.cos(roll), math.sin(roll)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    R = np.empty((3, 3))
    R[0, 0] = cy * cp
    R[0, 1] = cy * sp * sr - sy * cr
    R[0, 2] = cy * sp * cr + sy * sr
    R[1, 0] = sy * cp
    R[1, 1] = sy * sp * sr + cy * cr
    R[1, 2] = sy * sp * cr - cy * sr
    R[2, 0] = -sp
    R[2, 1] = cp * sr
    R[2, 2] = cp * cr
    return R


@njit(cache=True)
def _set_euler(s, R):
    v = min(1.0, max(-1.0, R[2, 0]))
    s[_EUL + 1] = -math.asin(v)
    s[_EUL] = math.atan2(R[2, 1], R[2, 2])
    s[_EUL + 2] = math.atan2(R[1, 0], R[0, 0])


@njit(cache=True)
def _axis_angle(kx, ky, kz, th):
    c, sn = math.cos(th), math.sin(th)
    C = 1.0 - c
    R = np.empty((3, 3))
    R[0, 0] = c + kx * kx * C
    R[0, 1] = kx * ky * C - kz * sn
    R[0, 2] = kx * kz * C + ky * sn
    R[1, 0] = ky * kx * C + kz * sn
    R[1, 1] = c + ky * ky * C
    R[1, 2] = ky * kz * C - kx * sn
    R[2, 0] = kz * kx * C - ky * sn
    R[2, 1] = kz * ky * C + kx * sn
    R[2, 2] = c + kz * kz * C
    return R


@njit(cache=True)
def arc_polygon(cx, cy, hx, hy, r, R, step, out):
    """Support polygon of an upright peg at ``(cx, cy)`` over a hole at ``(hx, hy)``.

    Rim samples at multiples of ``step`` (world angle about the peg center)
    outside the hole plus the two rim intersection points, counter-clockwise.
    Returns the vertex count; the chord, when present, is the closing edge
    from the last vertex back to the first.
    """
    dx = hx - cx
    dy = hy - cy
    d = math.hypot(dx, dy)
    if d >= r + R:
        n = int(round(2.0 * math.pi / step))
        for j in range(n):
            out[j, 0] = cx + r * math.cos(j * step)
            out[j, 1] = cy + r * math.sin(j * step)
        return n
    if d <= R - r:
        return 0
    a = (d * d + r * r - R * R) / (2.0 * d)
    beta = math.acos(min(1.0, max(-1.0, a / r)))
    gamma = math.atan2(dy, dx)
    start = gamma + beta
    end = gamma - beta + 2.0 * math.pi
    out[0, 0] = cx + r * math.cos(start)
    out[0, 1] = cy + r * math.sin(start)
    n = 1
    j = math.floor(start / step) + 1
    ang = j * step
    while ang < end - 1e-9:
        if ang > start + 1e-9:
            out[n, 0] = cx + r * math.cos(ang)
            out[n, 1] = cy + r * math.sin(ang)
            n += 1
        j += 1
        ang = j * step
    out[n, 0] = cx + r * math.cos(end)
    out[n, 1] = cy + r * math.sin(end)
    return n + 1


@njit(cache=True)
def _chord(cx, cy, hx, hy, r, R):
    """(ok, kx, ky, px, py) of the rim intersection line for an upright peg."""
    dx = hx - cx
    dy = hy - cy
    d = math.hypot(dx, dy)
    if d >= r + R or d <= R - r:
        return False, 0.0, 0.0, 0.0, 0.0
    a = (d * d + r * r - R * R) / (2.0 * d)
    ux = dx / d
    uy = dy / d
    return True, -uy, ux, cx + a * ux, cy + a * uy


@njit(cache=True)
def _inside_fast(qx, qy, cx, cy, hx, hy, r, R, step):
    """1 inside, 0 outside, -1 undecided without the full polygon."""
    dx = hx - cx
    dy = hy - cy
    d = math.hypot(dx, dy)
    if d < r + R:
        a = (d * d + r * r - R * R) / (2.0 * d)
        if ((qx - cx) * dx + (qy - cy) * dy) / d > a + 1e-12:
            return 0
    # every polygon edge lies at least r cos(step / 2) from the peg center
    if math.hypot(qx - cx, qy - cy) <= r * math.cos(step / 2.0):
        return 1
    return -1


@njit(cache=True)
def _inside_polygon(qx, qy, verts, n):
    for i in range(n):
        j = (i + 1) % n
        ex = verts[j, 0] - verts[i, 0]
        ey = verts[j, 1] - verts[i, 1]
        if ex * (qy - verts[i, 1]) - ey * (qx - verts[i, 0]) < -1e-15:
            return False
    return True


@njit(cache=True)
def _nearest_edge(qx, qy, verts, n):
    best = 0
    best_d = np.inf
    best_v = -np.inf
    for i in range(n):
        j = (i + 1) % n
        ax, ay = verts[i, 0], verts[i, 1]
        ex = verts[j, 0] - ax
        ey = verts[j, 1] - ay
        L2 = ex * ex + ey * ey
        t = ((qx - ax) * ex + (qy - ay) * ey) / L2
        t = min(1.0, max(0.0, t))
        dist = math.hypot(qx - ax - t * ex, qy - ay - t * ey)
        viol = -(ex * (qy - ay) - ey * (qx - ax)) / math.sqrt(L2)
        if dist < best_d - 1e-12 or (abs(dist - best_d) <= 1e-12 and viol > best_v):
            best, best_d, best_v = i, dist, viol
    return best


@njit(cache=True)
def _upright(s, cx, cy, z):
    s[_P] = cx
    s[_P + 1] = cy
    s[_P + 2] = z
    s[_EUL] = 0.0
    s[_EUL + 1] = 0.0
    s[_EUL + 2] = s[_YAW]
    s[_TH] = 0.0


@njit(cache=True)
def _clear_ext(s):
    for i in range(6):
        s[_EXT + i] = 0.0


@njit(cache=True)
def _free_step(s, w, hole, gp, sp):
    dt, b_free, b_rot = sp[0], sp[3], sp[4]
    r, clearance, hole_depth = gp[0], gp[1], gp[2]
    for i in range(3):
        s[_TW + i] = w[i] / b_free
        s[_TW + 3 + i] = w[3 + i] / b_rot
    wx, wy, wz = s[_TW + 3] * dt, s[_TW + 4] * dt, s[_TW + 5] * dt
    ang = math.sqrt(wx * wx + wy * wy + wz * wz)
    R = _rotmat(s[_EUL], s[_EUL + 1], s[_EUL + 2])
    if ang > 0.0:
        R = _axis_angle(wx / ang, wy / ang, wz / ang, ang) @ R
    _set_euler(s, R)
    for i in range(3):
        s[_P + i] += s[_TW + i] * dt
    _clear_ext(s)
    if s[_P + 2] <= 0.0:
        # touchdown; the controller keeps the peg upright in free space
        s[_YAW] = s[_EUL + 2]
        d = math.hypot(s[_P] - hole[0], s[_P + 1] - hole[1])
        if d <= clearance:
            s[_MODE] = INSERT
            z = max(s[_P + 2], -hole_depth)
            _upright(s, s[_P], s[_P + 1], z)
            s[_DEPTH] = -z
        else:
            s[_MODE] = SURFACE
            _upright(s, s[_P], s[_P + 1], 0.0)
            s[_TW + 2] = 0.0
            s[_U] = s[_P]
            s[_U + 1] = s[_P + 1]


@njit(cache=True)
def _tilt_pose(s, kx, ky, hx, hy, th):
    Rt = _axis_angle(kx, ky, 0.0, th)
    rx = s[_U] - hx
    ry = s[_U + 1] - hy
    s[_P] = hx + Rt[0, 0] * rx + Rt[0, 1] * ry
    s[_P + 1] = hy + Rt[1, 0] * rx + Rt[1, 1] * ry
    s[_P + 2] = Rt[2, 0] * rx + Rt[2, 1] * ry
    _set_euler(s, Rt @ _rotmat(0.0, 0.0, s[_YAW]))


@njit(cache=True)
def _enter_insert(s, cx, cy):
    s[_MODE] = INSERT
    _upright(s, cx, cy, 0.0)
    s[_DEPTH] = 0.0
    s[_U] = cx
    s[_U + 1] = cy


@njit(cache=True)
def _slide(s, w, mu, b_slide, dt):
    """Coulomb sliding of the upright contact point; returns normal load."""
    N = -w[2]
    fx, fy = w[0], w[1]
    f = math.hypot(fx, fy)
    vx = 0.0
    vy = 0.0
    if N > 0.0 and f > mu * N:
        sp = (f - mu * N) / b_slide
        vx = sp * fx / f
        vy = sp * fy / f
        s[_U] += vx * dt
        s[_U + 1] += vy * dt
        s[_EXT] = -mu * N * fx / f
        s[_EXT + 1] = -mu * N * fy / f
    else:
        s[_EXT] = -fx
        s[_EXT + 1] = -fy
    s[_EXT + 2] = N
    return vx, vy


@njit(cache=True)
def _tilt_step(s, w, hole, gp, sp):
    dt, mu, b_slide, c_tilt, rate_cap, th_max = sp[0], sp[1], sp[5], sp[7], sp[8], sp[9]
    r, clearance = gp[0], gp[1]
    R = r + clearance
    kx, ky = s[_K], s[_K + 1]
    hx, hy = s[_H], s[_H + 1]
    px, py, pz = s[_P], s[_P + 1], s[_P + 2]
    # moment about the hinge line
    ax, ay, az = px - hx, py - hy, pz
    mx = w[3] + ay * w[2] - az * w[1]
    my = w[4] + az * w[0] - ax * w[2]
    M = kx * mx + ky * my
    rate = min(rate_cap, max(-rate_cap, M / c_tilt))
    th_old = s[_TH]
    th = min(th_max, th_old + rate * dt)
    _clear_ext(s)
    vx, vy = _slide(s, w, mu, b_slide, dt)
    if vx != 0.0 or vy != 0.0:
        d = math.hypot(s[_U] - hole[0], s[_U + 1] - hole[1])
        if d <= clearance:
            _enter_insert(s, s[_U], s[_U + 1])
            s[_TW + 2] = 0.0
            return
        ok, nkx, nky, nhx, nhy = _chord(s[_U], s[_U + 1], hole[0], hole[1], r, R)
        if not ok:
            th = 0.0
        else:
            s[_K], s[_K + 1], s[_H], s[_H + 1] = nkx, nky, nhx, nhy
            kx, ky, hx, hy = nkx, nky, nhx, nhy
    if th <= 0.0:
        s[_MODE] = SURFACE
        _upright(s, s[_U], s[_U + 1], 0.0)
    else:
        s[_TH] = th
        _tilt_pose(s, kx, ky, hx, hy, th)
    om = (s[_TH] - th_old) / dt
    s[_TW] = (s[_P] - px) / dt
    s[_TW + 1] = (s[_P + 1] - py) / dt
    s[_TW + 2] = (s[_P + 2] - pz) / dt
    s[_TW + 3] = om * kx
    s[_TW + 4] = om * ky
    s[_TW + 5] = 0.0


@njit(cache=True)
def _surface_step(s, w, hole, gp, sp, verts):
    dt, mu, step, b_slide = sp[0], sp[1], sp[2], sp[5]
    r, clearance = gp[0], gp[1]
    R = r + clearance
    N = -w[2]
    if N <= 0.0:
        s[_MODE] = FREE
        _free_step(s, w, hole, gp, sp)
        if s[_P + 2] <= 0.0:
            s[_P + 2] = 0.0
            s[_MODE] = SURFACE
        return
    cx, cy = s[_P], s[_P + 1]
    qx = cx + w[4] / N
    qy = cy - w[3] / N
    verdict = _inside_fast(qx, qy, cx, cy, hole[0], hole[1], r, R, step)
    n = 0
    if verdict != 1:
        n = arc_polygon(cx, cy, hole[0], hole[1], r, R, step, verts)
        if verdict == -1 and n >= 2:
            verdict = 1 if _inside_polygon(qx, qy, verts, n) else 0
    if verdict == 0 and n >= 2:
        i = _nearest_edge(qx, qy, verts, n)
        j = (i + 1) % n
        ex = verts[j, 0] - verts[i, 0]
        ey = verts[j, 1] - verts[i, 1]
        L = math.hypot(ex, ey)
        s[_MODE] = TILT
        s[_K] = ex / L
        s[_K + 1] = ey / L
        s[_H] = 0.5 * (verts[i, 0] + verts[j, 0])
        s[_H + 1] = 0.5 * (verts[i, 1] + verts[j, 1])
        s[_U] = cx
        s[_U + 1] = cy
        s[_TH] = 0.0
        _tilt_step(s, w, hole, gp, sp)
        return
    _clear_ext(s)
    s[_U] = cx
    s[_U + 1] = cy
    vx, vy = _slide(s, w, mu, b_slide, dt)
    if vx == 0.0 and vy == 0.0:
        for i in range(3):
            s[_EXT + 3 + i] = -w[3 + i]
    s[_P] = s[_U]
    s[_P + 1] = s[_U + 1]
    for i in range(6):
        s[_TW + i] = 0.0
    s[_TW] = vx
    s[_TW + 1] = vy
    if math.hypot(s[_P] - hole[0], s[_P + 1] - hole[1]) <= clearance:
        _enter_insert(s, s[_P], s[_P + 1])


@njit(cache=True)
def _insert_step(s, w, hole, gp, sp):
    dt, b_ins = sp[0], sp[6]
    clearance, hole_depth = gp[1], gp[2]
    _clear_ext(s)
    old_x, old_y, old_z = s[_P], s[_P + 1], s[_P + 2]
    z = old_z + w[2] / b_ins * dt
    if z > 0.0:
        s[_MODE] = FREE
        _free_step(s, w, hole, gp, sp)
        return
    if z <= -hole_depth:
        z = -hole_depth
        if w[2] < 0.0:
            s[_EXT + 2] = -w[2]
    depth = -z
    ox = old_x + w[0] / b_ins * dt - hole[0]
    oy = old_y + w[1] / b_ins * dt - hole[1]
    lim = clearance * (1.0 - depth / hole_depth)
    o = math.hypot(ox, oy)
    if o > lim:
        sc = lim / o
        # wall carries the part of the horizontal push beyond the limit
        s[_EXT] = -w[0] * (1.0 - sc)
        s[_EXT + 1] = -w[1] * (1.0 - sc)
        ox *= sc
        oy *= sc
    _upright(s, hole[0] + ox, hole[1] + oy, z)
    s[_DEPTH] = depth
    s[_TW] = (s[_P] - old_x) / dt
    s[_TW + 1] = (s[_P + 1] - old_y) / dt
    s[_TW + 2] = (z - old_z) / dt
    s[_TW + 3] = 0.0
    s[_TW + 4] = 0.0
    s[_TW + 5] = 0.0


@njit(cache=True)
def _step(s, w, hole, gp, sp, verts):
    for i in range(6):
        if not math.isfinite(w[i]):
            return BAD_WRENCH
    x0, y0, z0 = s[_P], s[_P + 1], s[_P + 2]
    mode = int(s[_MODE])
    if mode == FREE:
        _free_step(s, w, hole, gp, sp)
    elif mode == SURFACE:
        _surface_step(s, w, hole, gp, sp, verts)
    elif mode == TILT:
        _tilt_step(s, w, hole, gp, sp)
    else:
        _insert_step(s, w, hole, gp, sp)
    s[_CLOCK] += sp[0]
    s[_ODO] += math.sqrt((s[_P] - x0) ** 2 + (s[_P + 1] - y0) ** 2 + (s[_P + 2] - z0) ** 2)
    if abs(s[_EUL + 1]) >= math.pi / 2 - 0.1:
        return EULER_SINGULAR
    return OK


@njit(cache=True)
def _wrap(a):
    # result in (-pi, pi]
    return math.pi - (math.pi - a) % (2.0 * math.pi)


@njit(cache=True)
def impedance_kernel(pos, eul, twist, xd, vd, Kp, Kd, ff, out):
    """Body wrench from the task-space impedance law (see control.impedance_wrench)."""
    err = np.empty(6)
    for i in range(3):
        err[i] = xd[i] - pos[i]
        err[3 + i] = _wrap(xd[3 + i] - eul[i])
    y = np.zeros(6)
    for i in range(6):
        for j in range(6):
            y[i] += Kp[i, j] * err[j]
    sp, cp = math.sin(eul[1]), math.cos(eul[1])
    sy, cy = math.sin(eul[2]), math.cos(eul[2])
    # T^T z = y_rot, with T mapping Euler rates to angular velocity
    # T = [[cy cp, -sy, 0], [sy cp, cy, 0], [-sp, 0, 1]]
    z2 = y[5]
    # rows of T^T: [cy cp, sy cp, -sp], [-sy, cy, 0], [0, 0, 1]
    a = y[3] + sp * z2
    b = y[4]
    # solve [[cy cp, sy cp], [-sy, cy]] [z0, z1] = [a, b]
    det = cp
    z0 = (cy * a - sy * cp * b) / det
    z1 = (sy * a + cy * cp * b) / det
    damp = np.zeros(6)
    for i in range(6):
        for j in range(6):
            damp[i] += Kd[i, j] * (twist[j] - vd[j])
    out[0] = y[0] - damp[0] + ff[0]
    out[1] = y[1] - damp[1] + ff[1]
    out[2] = y[2] - damp[2] + ff[2]
    out[3] = z0 - damp[3] + ff[3]
    out[4] = z1 - damp[4] + ff[4]
    out[5] = z2 - damp[5] + ff[5]


@njit(cache=True)
def _advance(s, n, hole, gp, sp, xd, vd, Kp, Kd, ff, noise, sensed):
    dt = sp[0]
    w = np.empty(6)
    pos = np.empty(3)
    verts = np.empty((int(2.0 * math.pi / sp[2]) + 8, 2))
    for k in range(n):
        for i in range(3):
            pos[i] = s[_P + i] + noise[k, i]
            sensed[k, i] = pos[i]
        impedance_kernel(pos, s[_EUL:_EUL + 3], s[_TW:_TW + 6], xd, vd, Kp, Kd, ff, w)
        code = _step(s, w, hole, gp, sp, verts)
        if code != OK:
            return code
        for i in range(6):
            xd[i] += vd[i] * dt
    return OK


@njit(cache=True)
def _step_once(s, w, hole, gp, sp):
    verts = np.empty((int(2.0 * math.pi / sp[2]) + 8, 2))
    return _step(s, w, hole, gp, sp, verts)


# ---------------------------------------------------------------------------
# Python-facing API
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class WorldState:
    """Ground truth of one episode. ``x`` is the kernel state vector."""

    geom: PegHoleGeometry
    hole: RigidPose
    cfg: SimConfig
    x: np.ndarray = field(repr=False)

    def copy(self) -> "WorldState":
        return WorldState(self.geom, self.hole, self.cfg, self.x.copy())

    @property
    def peg_pose(self) -> RigidPose:
        return RigidPose(self.x[_P:_P + 3].copy(), self.x[_EUL:_EUL + 3].copy())

    @property
    def twist(self) -> np.ndarray:
        return self.x[_TW:_TW + 6].copy()

    @property
    def hole_xy(self) -> np.ndarray:
        return self.hole.position[:2].copy()

    @property
    def e_true(self) -> np.ndarray:
        """Horizontal vector from the peg axis to the hole axis."""
        c = self.x[_U:_U + 2] if self.mode == TILT else self.x[_P:_P + 2]
        return self.hole_xy - c

    @property
    def mode(self) -> int:
        return int(self.x[_MODE])

    @property
    def contact_mode(self) -> str:
        return MODE_NAMES[self.mode]

    @property
    def clock(self) -> float:
        return float(self.x[_CLOCK])

    @property
    def odometer(self) -> float:
        return float(self.x[_ODO])

    @property
    def inserted_depth(self) -> float:
        return float(self.x[_DEPTH]) if self.mode == INSERT else 0.0

    @property
    def tilt_angle(self) -> float:
        return float(self.x[_TH])

    @property
    def hinge(self):
        """(direction, point) of the current tilt hinge, or None when not tilting."""
        if self.mode != TILT:
            return None
        return self.x[_K:_K + 2].copy(), self.x[_H:_H + 2].copy()

    @property
    def external_wrench(self) -> np.ndarray:
        return self.x[_EXT:_EXT + 6].copy()

    @property
    def contacts(self) -> list[Contact]:
        return contact_query(self)[0]


def _new_state() -> np.ndarray:
    return np.zeros(NSTATE)


def spawn(e0, geom: PegHoleGeometry | None = None, cfg: SimConfig | None = None, *,
          hole_xy=(0.0, 0.0), height: float = 0.03, check: bool = True) -> WorldState:
    """Upright peg ``height`` above the hole top with displacement ``e0``.

    ``e0`` points from the peg axis to the hole axis, so the peg origin
    starts at ``hole - e0``.
    """
    geom = geom or PegHoleGeometry()
    cfg = cfg or SimConfig()
    e0 = np.asarray(e0, float)
    if check and not geom.in_partial_overlap(e0):
        raise ValueError(f"initial displacement {e0} is outside the partial-overlap set")
    hole = RigidPose(np.array([hole_xy[0], hole_xy[1], 0.0]))
    x = _new_state()
    x[_P:_P + 2] = hole.position[:2] - e0
    x[_P + 2] = height
    x[_MODE] = FREE
    return WorldState(geom, hole, cfg, x)


def spawn_resting(e0, geom: PegHoleGeometry | None = None, cfg: SimConfig | None = None,
                  **kw) -> WorldState:
    """Like :func:`spawn` but already resting upright on the hole block."""
    w = spawn(e0, geom, cfg, height=0.0, **kw)
    w.x[_MODE] = SURFACE
    w.x[_U:_U + 2] = w.x[_P:_P + 2]
    return w


def step(world: WorldState, wrench, cfg: SimConfig | None = None) -> WorldState:
    """Advance one time step under a body wrench about the peg origin."""
    wrench = np.asarray(wrench, float).reshape(6)
    if not np.all(np.isfinite(wrench)):
        raise ValueError("wrench must be finite")
    cfg = cfg or world.cfg
    out = world.copy()
    code = _step_once(out.x, wrench, world.hole_xy, _geom_params(world.geom), cfg.kernel_params())
    if code == EULER_SINGULAR:
        raise EulerSingularity("Euler singularity")
    return out


class Stepper:
    """Runs the 1 kHz impedance loop in place on a world."""

    def __init__(self, world: WorldState, rng: np.random.Generator | None = None):
        self.world = world
        cfg = world.cfg
        self._hole = world.hole_xy
        self._gp = _geom_params(world.geom)
        self._sp = cfg.kernel_params()
        self._noise = cfg.noise
        self._rng = rng if rng is not None else np.random.default_rng(cfg.seed)
        self._zeros = {}

    def advance(self, n: int, x_d, v_d, K_p, K_d, F_ff) -> np.ndarray:
        """Run ``n`` steps; return the sensed peg origin positions, shape (n, 3)."""
        if self._noise > 0:
            noise = self._rng.uniform(-self._noise, self._noise, (n, 3))
        else:
            noise = self._zeros.get(n)
            if noise is None:
                noise = self._zeros[n] = np.zeros((n, 3))
        sensed = np.empty((n, 3))
        code = _advance(self.world.x, n, self._hole, self._gp, self._sp,
                        np.array(x_d, float), np.asarray(v_d, float), np.asarray(K_p, float),
                        np.asarray(K_d, float), np.asarray(F_ff, float), noise, sensed)
        if code == EULER_SINGULAR:
            raise EulerSingularity("Euler singularity")
        if code == BAD_WRENCH:
            raise FloatingPointError("non-finite wrench")
        return sensed


def contact_query(world: WorldState, geom: PegHoleGeometry | None = None,
                  cfg: SimConfig | None = None):
    """Current contact set and external wrench estimate."""
    geom = geom or world.geom
    cfg = cfg or world.cfg
    mode = world.mode
    ext = world.external_wrench
    up = np.array([0.0, 0.0, 1.0])
    mu = cfg.mu
    if mode == FREE:
        return [], np.zeros(6)
    if mode == SURFACE:
        pts = rim_support_points(world.x[_P:_P + 2], world.hole_xy, geom, cfg.rim_step_deg)
        return [Contact(np.array([p[0], p[1], 0.0]), up, mu) for p in pts], ext
    if mode == TILT:
        k, h = world.hinge
        c = world.x[_U:_U + 2]
        R = geom.hole_radius
        half = math.sqrt(max(geom.peg_radius ** 2 - float(np.hypot(*(h - c))) ** 2, 0.0))
        # a hinge on a full-circle polygon edge has no rim intersection
        if float(np.hypot(*(h - world.hole_xy))) < R + 1e-9 and half > 0:
            ends = [h - half * k, h + half * k]
        else:
            ends = [h]
        return [Contact(np.array([p[0], p[1], 0.0]), up, mu) for p in ends], ext
    # inside the hole: the peg touches the wall on the side of its offset
    off = world.x[_P:_P + 2] - world.hole_xy
    o = float(np.hypot(*off))
    z = world.x[_P + 2]
    contacts = []
    if o > 0:
        u = off / o
        p = world.x[_P:_P + 2] + geom.peg_radius * u
        contacts.append(Contact(np.array([p[0], p[1], z]), np.array([-u[0], -u[1], 0.0]), mu))
    if world.inserted_depth >= geom.hole_depth - 1e-12:
        c = world.x[_P:_P + 2]
        contacts.append(Contact(np.array([c[0], c[1], z]), up, mu))
    return contacts, ext


def rim_support_points(center, hole_xy, geom: PegHoleGeometry, step_deg: float = 5.0) -> np.ndarray:
    """Counter-clockwise rim samples of an upright peg that rest on the surface."""
    step = math.radians(step_deg)
    buf = np.empty((int(2 * math.pi / step) + 8, 2))
    n = arc_polygon(float(center[0]), float(center[1]), float(hole_xy[0]), float(hole_xy[1]),
                    geom.peg_radius, geom.hole_radius, step, buf)
    return buf[:n].copy()


def is_inserted(world: WorldState, geom: PegHoleGeometry | None = None) -> bool:
    geom = geom or world.geom
    return world.inserted_depth >= geom.hole_depth - 1e-4


def peg_rotation(world: WorldState) -> np.ndarray:
    return _euler_to_matrix(world.x[_EUL:_EUL + 3])
