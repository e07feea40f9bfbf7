"""Task-space impedance law and the insertion state machine.

The controller runs at 50 Hz. Each tick it reads a :class:`SensorSnapshot`
and emits a :class:`ControllerCommand` that the 1 kHz impedance loop tracks
until the next tick.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
import enum
import math

import numpy as np

from .baselines import LissajousParams, SpiralParams, lissajous_point, spiral_point
from .geom import PegHoleGeometry, RigidPose, angle_between
from .pomdp import (
    Inserted,
    K_PROBES,
    Move,
    PolicyState,
    Stay,
    TiltProbe,
    Tilted,
    classify_observation,
    next_action,
)
from .sim import EULER_LIMIT, EulerSingularity, impedance_kernel


class FsmState(enum.Enum):
    APPROACH = "Approach"
    TILT = "Tilt"
    MOVE = "Move"
    INSERT = "Insert"
    FINISH = "Finish"
    FAIL = "Fail"
    RESET = "Reset"
    SPIRAL = "Spiral"


S = FsmState
# edges of the insertion state machine; the blind-search variant swaps Tilt
# and Move for a single Spiral state
TRANSITIONS = frozenset({
    (S.APPROACH, S.TILT), (S.TILT, S.MOVE), (S.MOVE, S.INSERT), (S.INSERT, S.FINISH),
    (S.APPROACH, S.FAIL), (S.TILT, S.FAIL), (S.MOVE, S.FAIL), (S.INSERT, S.FAIL),
    (S.FAIL, S.RESET), (S.RESET, S.APPROACH),
})
BASELINE_TRANSITIONS = frozenset({
    (S.APPROACH, S.SPIRAL), (S.SPIRAL, S.INSERT), (S.SPIRAL, S.FAIL), (S.INSERT, S.FINISH),
    (S.APPROACH, S.FAIL), (S.INSERT, S.FAIL), (S.FAIL, S.RESET), (S.RESET, S.APPROACH),
})
TERMINAL = frozenset({S.FINISH, S.FAIL})


class IllegalTransition(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# commands and sensing
# ---------------------------------------------------------------------------

def _check_spd(M, name):
    M = np.asarray(M, float)
    if M.shape != (6, 6) or not np.allclose(M, M.T):
        raise ValueError(f"{name} must be a symmetric 6x6 matrix")
    if np.linalg.eigvalsh(M)[0] <= 0:
        raise ValueError(f"{name} must be positive definite")
    return M


@dataclass(frozen=True, eq=False)
class ControllerCommand:
    desired_pose: RigidPose
    desired_twist: np.ndarray
    stiffness: np.ndarray
    damping: np.ndarray
    feedforward_wrench: np.ndarray = field(default_factory=lambda: np.zeros(6))
    frame: str = "peg"

    def __post_init__(self):
        object.__setattr__(self, "stiffness", _check_spd(self.stiffness, "stiffness"))
        object.__setattr__(self, "damping", _check_spd(self.damping, "damping"))
        object.__setattr__(self, "desired_twist", np.asarray(self.desired_twist, float).reshape(6))
        object.__setattr__(self, "feedforward_wrench",
                           np.asarray(self.feedforward_wrench, float).reshape(6))


@dataclass(frozen=True, eq=False)
class SensorSnapshot:
    pose: RigidPose
    twist: np.ndarray
    wrench: np.ndarray
    clock: float
    samples: np.ndarray | None = None  # 1 kHz positions since the previous tick

    def __post_init__(self):
        vals = np.concatenate([self.pose.as_vector(), np.ravel(self.twist), np.ravel(self.wrench)])
        if not np.all(np.isfinite(vals)) or not math.isfinite(self.clock):
            raise ValueError("sensor values must be finite")


# ---------------------------------------------------------------------------
# impedance law
# ---------------------------------------------------------------------------

def euler_rate_matrix(phi) -> np.ndarray:
    """``T(phi)`` with ``omega = T(phi) @ dphi/dt`` for (roll, pitch, yaw) angles."""
    _, pitch, yaw = phi
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    return np.array([
        [cy * cp, -sy, 0.0],
        [sy * cp, cy, 0.0],
        [-sp, 0.0, 1.0],
    ])


def euler_rate_map(phi) -> np.ndarray:
    """Block-diagonal ``A(phi) = diag(I, T(phi))``."""
    if abs(phi[1]) >= EULER_LIMIT:
        raise EulerSingularity("Euler singularity")
    A = np.eye(6)
    A[3:, 3:] = euler_rate_matrix(phi)
    return A


def wrap_angle(a):
    """Wrap to (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(a, float), 2 * np.pi)


def pose_error(desired: RigidPose, actual: RigidPose) -> np.ndarray:
    return np.concatenate([desired.position - actual.position,
                           wrap_angle(desired.euler - actual.euler)])


def impedance_wrench(cmd: ControllerCommand, sense: SensorSnapshot) -> np.ndarray:
    """``A^-T K_p (x_d - x_p) - K_d (v_p - v_d) + F_ff``."""
    A = euler_rate_map(sense.pose.euler)
    elastic = np.linalg.solve(A.T, cmd.stiffness @ pose_error(cmd.desired_pose, sense.pose))
    return elastic - cmd.damping @ (np.asarray(sense.twist, float) - cmd.desired_twist) \
        + cmd.feedforward_wrench


def impedance_wrench_fast(cmd: ControllerCommand, sense: SensorSnapshot) -> np.ndarray:
    """Same law evaluated by the compiled kernel used inside the simulator."""
    out = np.empty(6)
    impedance_kernel(sense.pose.position, sense.pose.euler, np.asarray(sense.twist, float),
                     cmd.desired_pose.as_vector(), cmd.desired_twist, cmd.stiffness,
                     cmd.damping, cmd.feedforward_wrench, out)
    return out


def feedforward_wrench(F, frame_pose: RigidPose) -> np.ndarray:
    """Express a wrench given at frame ``a`` at the peg origin.

    ``frame_pose`` is the pose of frame ``a`` relative to the peg frame.
    """
    F = np.asarray(F, float).reshape(6)
    R = frame_pose.rotation
    f = R @ F[:3]
    m = R @ F[3:] + np.cross(frame_pose.position, f)
    return np.concatenate([f, m])


def point_force(force, point, origin) -> np.ndarray:
    """World-axes wrench about ``origin`` of a pure force acting at ``point``."""
    return feedforward_wrench(np.concatenate([force, np.zeros(3)]),
                              RigidPose(np.asarray(point, float) - np.asarray(origin, float)))


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def _diag(*v):
    return np.diag(np.asarray(v, float))


@dataclass(frozen=True)
class Gains:
    stiffness: tuple
    damping: tuple

    def __post_init__(self):
        _check_spd(_diag(*self.stiffness), "stiffness")
        _check_spd(_diag(*self.damping), "damping")

    @cached_property
    def K_p(self):
        return _diag(*self.stiffness)

    @cached_property
    def K_d(self):
        return _diag(*self.damping)


@dataclass(frozen=True)
class ControlConfig:
    method: str = "active"                # active | spiral | lissajous
    rate_hz: float = 50.0
    sim_rate_hz: float = 1000.0
    approach_speed: float = 0.05          # m/s
    approach_overshoot: float = 5e-3      # target below the estimated hole top
    approach_timeout: float = 5.0
    hole_top_z: float = 0.0               # estimate available to the controller
    contact_threshold: float = 3.0        # N
    press_force: float = 5.0              # N, Move and blind search
    probe_force: float = 10.0             # N
    probe_radius_ratio: float = 0.9
    probe_preload: float = 5e-3           # Tilt vertical set point below contact, m
    probe_settle_ticks: int = 5
    probe_ramp_ticks: int = 10
    probe_hold_ticks: int = 15
    n_probes: int = K_PROBES
    move_speed: float = 0.01              # m/s
    move_max_travel: float = 0.03         # m
    insert_detect_drop: float = 1e-3      # m below contact height
    insert_detect_speed: float = 1e-3     # m/s horizontal
    insert_overdrive: float = 2e-3
    finish_tolerance: float = 1e-4
    stall_window: float = 1.0             # s
    stall_descent: float = 1e-4           # m
    resets: int = 0
    approach_gains: Gains = Gains((1000, 1000, 1000, 5, 5, 5), (20, 20, 20, 0.005, 0.005, 0.005))
    tilt_gains: Gains = Gains((1000, 1000, 100, 0.02, 0.02, 0.02), (20, 20, 20, 0.001, 0.001, 0.001))
    move_gains: Gains = Gains((10000, 10000, 100, 5, 5, 5), (20, 20, 20, 0.005, 0.005, 0.005))
    insert_gains: Gains = Gains((200, 200, 1000, 5, 5, 5), (20, 20, 20, 0.005, 0.005, 0.005))
    spiral: SpiralParams = SpiralParams()
    lissajous: LissajousParams = LissajousParams()

    def __post_init__(self):
        if self.method not in ("active", "spiral", "lissajous"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.rate_hz <= 0 or self.sim_rate_hz < self.rate_hz:
            raise ValueError("invalid rates")

    @property
    def period(self) -> float:
        return 1.0 / self.rate_hz

    @property
    def substeps(self) -> int:
        return int(round(self.sim_rate_hz / self.rate_hz))

    @property
    def probe_ticks(self) -> int:
        return self.probe_settle_ticks + self.probe_ramp_ticks + self.probe_hold_ticks

    def probe_point(self, index: int, geom: PegHoleGeometry) -> np.ndarray:
        """Horizontal probe offset from the peg axis for probe ``index`` (1-based)."""
        ang = 2 * np.pi * (index - 1) / self.n_probes
        rho = self.probe_radius_ratio * geom.peg_radius
        return rho * np.array([math.cos(ang), math.sin(ang)])

    def probe_force_at(self, tick: int) -> float:
        """Probe force magnitude ``tick`` ticks into a probe window."""
        t = tick - self.probe_settle_ticks
        if t < 0:
            return 0.0
        if t < self.probe_ramp_ticks:
            return self.probe_force * (t + 1) / self.probe_ramp_ticks
        return self.probe_force


# ---------------------------------------------------------------------------
# state machine
# ---------------------------------------------------------------------------

@dataclass
class FsmMemory:
    """Per-episode controller memory carried between ticks."""

    entered: float = 0.0
    z_contact: float = float("nan")
    origin_xy: np.ndarray | None = None
    home: np.ndarray | None = None
    probe_tick: int = 0
    probe_buffer: list = field(default_factory=list)
    axis_height: float = float("nan")
    direction: np.ndarray | None = None
    travel: float = 0.0
    depth_mark: tuple = (0.0, 0.0)
    resets_left: int = 0
    fail_reason: str | None = None
    transitions: list = field(default_factory=list)
    estimate: np.ndarray | None = None
    tilt_anchor: np.ndarray | None = None
    path_cache: tuple | None = None
    ticks: int = 0


def _cmd(pos, gains: Gains, v=None, ff=None, yaw=0.0) -> ControllerCommand:
    # gains were validated when the Gains object was built
    cmd = object.__new__(ControllerCommand)
    vals = {
        "desired_pose": RigidPose(np.asarray(pos, float), np.array([0.0, 0.0, yaw])),
        "desired_twist": np.zeros(6) if v is None else np.concatenate([v, np.zeros(3)]),
        "stiffness": gains.K_p,
        "damping": gains.K_d,
        "feedforward_wrench": np.zeros(6) if ff is None else np.asarray(ff, float),
        "frame": "peg",
    }
    for k, val in vals.items():
        object.__setattr__(cmd, k, val)
    return cmd


class Controller:
    """Stateful wrapper around :func:`fsm_step` for one episode."""

    def __init__(self, geom: PegHoleGeometry, cfg: ControlConfig | None = None):
        self.geom = geom
        self.cfg = cfg or ControlConfig()
        self.state = S.APPROACH
        self.policy = PolicyState.fresh(geom)
        self.mem = FsmMemory(resets_left=self.cfg.resets)
        self.command: ControllerCommand | None = None

    @property
    def done(self) -> bool:
        return self.state is S.FINISH or (self.state is S.FAIL and self.mem.resets_left <= 0)

    def tick(self, sense: SensorSnapshot) -> ControllerCommand:
        self.state, self.command, self.policy = fsm_step(
            self.state, sense, self.policy, self.cfg, self.mem, self.geom)
        return self.command


def _enter(state_to, state_from, sense, mem, cfg):
    allowed = TRANSITIONS if cfg.method == "active" else BASELINE_TRANSITIONS
    if (state_from, state_to) not in allowed:
        raise IllegalTransition(f"{state_from.value} -> {state_to.value}")
    mem.transitions.append((sense.clock, state_from, state_to))
    mem.entered = sense.clock
    return state_to


def fsm_step(state: FsmState, sense: SensorSnapshot, policy: PolicyState, cfg: ControlConfig,
             mem: FsmMemory, geom: PegHoleGeometry):
    """One 50 Hz controller tick.

    Returns the next state, the command to track until the next tick and
    the updated policy state. ``mem`` is updated in place.
    """
    try:
        return _fsm_step(state, sense, policy, cfg, mem, geom)
    except EulerSingularity:
        return _fail(state, sense, policy, cfg, mem, "euler_singularity")


def _fail(state, sense, policy, cfg, mem, reason):
    mem.fail_reason = reason
    if state is not S.FAIL:
        state = _enter(S.FAIL, state, sense, mem, cfg)
    return state, _hold(sense, cfg), policy


def _hold(sense, cfg):
    p = sense.pose.position
    return _cmd(p, cfg.approach_gains, yaw=0.0)


def _fsm_step(state, sense, policy, cfg, mem, geom):
    mem.ticks += 1
    p = sense.pose.position
    t = sense.clock
    Ta = cfg.period
    if mem.home is None:
        mem.home = p.copy()
        mem.entered = t

    if state is S.APPROACH:
        if abs(sense.wrench[2]) > cfg.contact_threshold:
            mem.z_contact = float(p[2])
            mem.origin_xy = p[:2].copy()
            if cfg.method == "active":
                state = _enter(S.TILT, state, sense, mem, cfg)
                mem.probe_tick = 0
                mem.probe_buffer = []
                return _tilt_tick(state, sense, policy, cfg, mem, geom)
            state = _enter(S.SPIRAL, state, sense, mem, cfg)
            return _spiral_tick(state, sense, policy, cfg, mem, geom)
        if t - mem.entered > cfg.approach_timeout:
            return _fail(state, sense, policy, cfg, mem, "approach_timeout")
        target = cfg.hole_top_z - cfg.approach_overshoot
        z0 = mem.home[2]
        elapsed = t - mem.entered
        z_now = max(target, z0 - cfg.approach_speed * elapsed)
        z_next = max(target, z0 - cfg.approach_speed * (elapsed + Ta))
        v = np.array([0.0, 0.0, (z_next - z_now) / Ta])
        return state, _cmd([mem.home[0], mem.home[1], z_now], cfg.approach_gains, v), policy

    if state is S.TILT:
        return _tilt_tick(state, sense, policy, cfg, mem, geom)

    if state is S.MOVE:
        return _move_tick(state, sense, policy, cfg, mem, geom)

    if state is S.SPIRAL:
        return _spiral_tick(state, sense, policy, cfg, mem, geom)

    if state is S.INSERT:
        depth = mem.z_contact - p[2]
        if depth >= geom.hole_depth - cfg.finish_tolerance:
            policy = policy.observe(Inserted())
            state = _enter(S.FINISH, state, sense, mem, cfg)
            return state, _hold(sense, cfg), policy
        t_mark, d_mark = mem.depth_mark
        if t - t_mark >= cfg.stall_window:
            if depth - d_mark < cfg.stall_descent:
                return _fail(state, sense, policy, cfg, mem, "stall")
            mem.depth_mark = (t, depth)
        target = [mem.origin_xy[0], mem.origin_xy[1],
                  mem.z_contact - geom.hole_depth - cfg.insert_overdrive]
        return state, _cmd(target, cfg.insert_gains), policy

    if state is S.FAIL:
        if mem.resets_left > 0:
            mem.resets_left -= 1
            state = _enter(S.RESET, state, sense, mem, cfg)
            return state, _cmd(mem.home, cfg.approach_gains), policy
        return state, _hold(sense, cfg), policy

    if state is S.RESET:
        if np.linalg.norm(p - mem.home) < 1e-3:
            policy = PolicyState.fresh(geom)
            mem.fail_reason = None
            state = _enter(S.APPROACH, state, sense, mem, cfg)
        return state, _cmd(mem.home, cfg.approach_gains), policy

    # Finish
    return state, _hold(sense, cfg), policy


def _insert_detected(sense, cfg, mem) -> bool:
    p = sense.pose.position
    return (p[2] < mem.z_contact - cfg.insert_detect_drop
            and math.hypot(sense.twist[0], sense.twist[1]) < cfg.insert_detect_speed)


def _enter_insert(state, sense, policy, cfg, mem, geom):
    state = _enter(S.INSERT, state, sense, mem, cfg)
    mem.origin_xy = sense.pose.position[:2].copy()
    mem.depth_mark = (sense.clock, mem.z_contact - sense.pose.position[2])
    target = [mem.origin_xy[0], mem.origin_xy[1],
              mem.z_contact - geom.hole_depth - cfg.insert_overdrive]
    return state, _cmd(target, cfg.insert_gains), policy


def _tilt_tick(state, sense, policy, cfg, mem, geom):
    if _insert_detected(sense, cfg, mem):
        # dropped in during probing; record it and let Move hand over
        policy = policy.observe(Inserted())
    if mem.probe_tick > 0 and sense.samples is not None:
        mem.probe_buffer.append(np.asarray(sense.samples, float))
    if mem.probe_tick == cfg.probe_ticks:
        obs = _evaluate_probe(cfg, mem, geom)
        policy = policy.observe(obs, probe=True)
        mem.probe_tick = 0
        mem.probe_buffer = []
        if isinstance(obs, Tilted):
            mem.estimate = policy.belief.e.copy()
    action = next_action(policy, cfg.n_probes, cfg.period)
    if isinstance(action, Stay) and action.failed:
        return _fail(state, sense, policy, cfg, mem, "probes_exhausted")
    if isinstance(action, (Move, Stay)):
        state = _enter(S.MOVE, state, sense, mem, cfg)
        mem.origin_xy = sense.pose.position[:2].copy()
        mem.direction = action.direction if isinstance(action, Move) else np.zeros(2)
        mem.travel = 0.0
        return _move_tick(state, sense, policy, cfg, mem, geom)
    assert isinstance(action, TiltProbe)
    # issue probe ``action.index``
    q = cfg.probe_point(action.index, geom)
    mag = cfg.probe_force_at(mem.probe_tick)
    mem.probe_tick += 1
    p = sense.pose.position
    R = sense.pose.rotation
    if mem.probe_tick == 1:
        mem.tilt_anchor = p.copy()
    anchor = mem.tilt_anchor
    ff = point_force([0.0, 0.0, -mag], p + R @ np.array([q[0], q[1], 0.0]), p)
    target = [anchor[0], anchor[1], mem.z_contact - cfg.probe_preload]
    return state, _cmd(target, cfg.tilt_gains, ff=ff), policy


def _evaluate_probe(cfg, mem, geom):
    # first buffered chunk covers the settle window; the rest covers ramp and hold
    chunks = mem.probe_buffer
    settle = np.concatenate(chunks[:cfg.probe_settle_ticks])
    active = np.concatenate(chunks[cfg.probe_settle_ticks:])
    height = float(np.mean(settle[:, 2]))
    return classify_observation(active, False, geom, axis_height=height)


def _move_tick(state, sense, policy, cfg, mem, geom):
    if _insert_detected(sense, cfg, mem):
        policy = policy.observe(Inserted())
        return _enter_insert(state, sense, policy, cfg, mem, geom)
    if mem.travel > cfg.move_max_travel:
        return _fail(state, sense, policy, cfg, mem, "overshoot")
    n = mem.direction
    step = cfg.move_speed * cfg.period
    x_d = np.array([mem.origin_xy[0] + n[0] * mem.travel,
                    mem.origin_xy[1] + n[1] * mem.travel,
                    mem.z_contact])
    mem.travel += step
    v = np.array([n[0], n[1], 0.0]) * cfg.move_speed
    ff = np.array([0.0, 0.0, -cfg.press_force, 0.0, 0.0, 0.0])
    return state, _cmd(x_d, cfg.move_gains, v, ff), policy


def _spiral_tick(state, sense, policy, cfg, mem, geom):
    if _insert_detected(sense, cfg, mem):
        policy = policy.observe(Inserted())
        return _enter_insert(state, sense, policy, cfg, mem, geom)
    tau = sense.clock - mem.entered
    if cfg.method == "spiral":
        if tau > cfg.spiral.duration:
            return _fail(state, sense, policy, cfg, mem, "coverage_exhausted")
        path = lambda u: spiral_point(u, cfg.spiral)  # noqa: E731
    else:
        path = lambda u: lissajous_point(u, cfg.lissajous)  # noqa: E731
    # consecutive ticks share a path sample
    key = round(tau * cfg.rate_hz)
    cached = mem.path_cache
    a = cached[1] if cached is not None and cached[0] == key else path(tau)
    b = path(tau + cfg.period)
    mem.path_cache = (key + 1, b)
    o = mem.origin_xy
    x_d = [o[0] + a[0], o[1] + a[1], mem.z_contact]
    v = np.array([b[0] - a[0], b[1] - a[1], 0.0]) / cfg.period
    ff = np.array([0.0, 0.0, -cfg.press_force, 0.0, 0.0, 0.0])
    return state, _cmd(x_d, cfg.move_gains, v, ff), policy


def estimation_error_deg(e_true, e_hat) -> float:
    """Angle between true and estimated displacement, degrees."""
    return math.degrees(angle_between(e_true, e_hat))
