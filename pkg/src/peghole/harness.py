"""Episode runner, experiment grid, metrics and result files."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
import configparser
import csv
from dataclasses import dataclass, field, fields, replace
import io
import json
import math
from pathlib import Path

import numpy as np

from .baselines import LissajousParams, SpiralParams
from .control import (
    ControlConfig,
    Controller,
    FsmState,
    Gains,
    SensorSnapshot,
    estimation_error_deg,
)
from .geom import PegHoleGeometry, RigidPose
from .pomdp import PolicyState, Tilted
from .sim import SimConfig, Stepper, WorldState, spawn, spawn_resting

METHODS = ("active", "spiral", "lissajous")
CSV_HEADER = ["method", "dr_mm", "theta_rad", "success", "Ts_s", "ls_m", "Tc_s", "eps_deg",
              "fail_reason"]
TRAJECTORY_FIELDS = ["time_s", "x_m", "y_m", "z_m", "fsm_state", "contact_mode"]

DR_RANGE = (6.67e-3, 15e-3)
N_DR = 10
N_THETA = 60


@dataclass(frozen=True)
class EpisodeConfig:
    method: str = "active"
    e0: tuple = (10e-3, 0.0)
    geom: PegHoleGeometry = PegHoleGeometry()
    sim: SimConfig = SimConfig()
    control: ControlConfig = ControlConfig()
    time_limit: float = 300.0
    seed: int = 0
    record: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if not self.time_limit > 0:
            raise ValueError("time limit must be positive")
        if not self.geom.in_partial_overlap(self.e0):
            raise ValueError("initial displacement must lie in the partial-overlap set")

    @property
    def dr(self) -> float:
        return float(np.hypot(*self.e0))

    @property
    def theta(self) -> float:
        return float(np.arctan2(self.e0[1], self.e0[0]))


@dataclass
class EpisodeMetrics:
    method: str
    dr: float
    theta: float
    success: bool
    search_time: float | None = None
    search_length: float | None = None
    cycle_time: float | None = None
    estimation_error: float | None = None   # degrees
    fail_reason: str | None = None
    transitions: tuple = field(default=(), repr=False)
    trajectory: list | None = field(default=None, repr=False)

    def row(self) -> list:
        return [self.method, _fmt(self.dr * 1e3), _fmt(self.theta), "1" if self.success else "0",
                _fmt(self.search_time), _fmt(self.search_length), _fmt(self.cycle_time),
                _fmt(self.estimation_error), self.fail_reason or ""]

    def as_dict(self) -> dict:
        return {
            "method": self.method,
            "dr_mm": _num(self.dr * 1e3),
            "theta_rad": _num(self.theta),
            "success": self.success,
            "Ts_s": _num(self.search_time),
            "ls_m": _num(self.search_length),
            "Tc_s": _num(self.cycle_time),
            "eps_deg": _num(self.estimation_error),
            "fail_reason": self.fail_reason,
        }


def _num(x):
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return None
    return float(x)


def _fmt(x) -> str:
    x = _num(x)
    return "" if x is None else repr(x)


def snapshot(world: WorldState, samples=None) -> SensorSnapshot:
    """Controller view of the world: sensed position, true orientation and twist."""
    pos = samples[-1] if samples is not None and len(samples) else world.x[0:3]
    return SensorSnapshot(RigidPose(pos.copy(), world.x[3:6].copy()), world.twist,
                          world.external_wrench, world.clock, samples)


def _trajectory_record(world: WorldState, state: FsmState) -> dict:
    p = world.x[0:3]
    return {"time_s": round(world.clock, 9), "x_m": float(p[0]), "y_m": float(p[1]),
            "z_m": float(p[2]), "fsm_state": state.value, "contact_mode": world.contact_mode}


def run_episode(cfg: EpisodeConfig, rng: np.random.Generator | None = None) -> EpisodeMetrics:
    """Drive the simulator and controller until Finish, Fail or the time limit."""
    ccfg = replace(cfg.control, method=cfg.method)
    world = spawn(cfg.e0, cfg.geom, cfg.sim)
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    stepper = Stepper(world, rng)
    ctrl = Controller(cfg.geom, ccfg)
    n = ccfg.substeps
    samples = None
    t_search = t_insert = t_finish = None
    odo_search = odo_insert = None
    eps = None
    seen = 0
    traj = [] if cfg.record else None
    timed_out = False
    while True:
        cmd = ctrl.tick(snapshot(world, samples))
        log = ctrl.mem.transitions
        for t, a, b in log[seen:]:
            if b in (FsmState.TILT, FsmState.SPIRAL):
                t_search, odo_search = t, world.odometer
            elif b is FsmState.INSERT:
                t_insert, odo_insert = t, world.odometer
            elif b is FsmState.FINISH:
                t_finish = t
            if a is FsmState.TILT and b is FsmState.MOVE and ctrl.mem.estimate is not None:
                eps = estimation_error_deg(world.e_true, ctrl.mem.estimate)
        seen = len(log)
        if traj is not None:
            traj.append(_trajectory_record(world, ctrl.state))
        if ctrl.done:
            break
        if world.clock >= cfg.time_limit - 1e-9:
            timed_out = True
            break
        samples = stepper.advance(n, cmd.desired_pose.as_vector(), cmd.desired_twist,
                                  cmd.stiffness, cmd.damping, cmd.feedforward_wrench)

    success = ctrl.state is FsmState.FINISH
    m = EpisodeMetrics(cfg.method, cfg.dr, cfg.theta, success,
                       transitions=tuple((a.value, b.value) for _, a, b in ctrl.mem.transitions),
                       trajectory=traj)
    if cfg.method == "active":
        m.estimation_error = eps
    if success:
        m.search_time = t_insert - t_search
        m.search_length = odo_insert - odo_search
        m.cycle_time = t_finish
    else:
        m.fail_reason = "timeout" if timed_out else (ctrl.mem.fail_reason or "fail")
    return m


# ---------------------------------------------------------------------------
# probe survey: every probe from a fresh resting start
# ---------------------------------------------------------------------------

@dataclass
class ProbeOutcome:
    index: int
    observation: object
    e_true: np.ndarray
    hinge: tuple | None          # realized (direction, point) in the simulator
    estimate: np.ndarray | None  # Dirac estimate when the probe tilted
    samples: np.ndarray | None = None  # sensed positions over ramp and hold
    axis_height: float = 0.0


def run_probe(e0, index: int, geom: PegHoleGeometry | None = None, sim: SimConfig | None = None,
              control: ControlConfig | None = None, rng=None) -> ProbeOutcome:
    """Apply tilt probe ``index`` to a peg resting at displacement ``e0``."""
    geom = geom or PegHoleGeometry()
    sim = sim or SimConfig()
    control = replace(control or ControlConfig(), method="active")
    world = spawn_resting(e0, geom, sim)
    stepper = Stepper(world, rng if rng is not None else np.random.default_rng(sim.seed))
    ctrl = Controller(geom, control)
    ctrl.state = FsmState.TILT
    ctrl.mem.z_contact = 0.0
    ctrl.mem.home = world.x[0:3].copy()
    ctrl.policy = PolicyState(geom, index - 1, ctrl.policy.belief)
    samples = None
    hinge = None
    chunks = []
    for _ in range(control.probe_ticks + 1):
        cmd = ctrl.tick(snapshot(world, samples))
        if ctrl.policy.probes_tried >= index:
            break
        samples = stepper.advance(control.substeps, cmd.desired_pose.as_vector(),
                                  cmd.desired_twist, cmd.stiffness, cmd.damping,
                                  cmd.feedforward_wrench)
        chunks.append(samples)
        if world.hinge is not None:
            hinge = world.hinge
    obs = ctrl.policy.last_observation
    est = ctrl.policy.belief.e.copy() if isinstance(obs, Tilted) else None
    settle = control.probe_settle_ticks
    height = float(np.mean(np.concatenate(chunks[:settle])[:, 2]))
    return ProbeOutcome(index, obs, world.e_true, hinge, est,
                        np.concatenate(chunks[settle:]), height)


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

def experiment_grid(n_dr: int = N_DR, n_theta: int = N_THETA, dr_range=DR_RANGE):
    """(dr, theta) pairs: radii include both ends, angles cover [-pi, pi) once."""
    drs = np.linspace(dr_range[0], dr_range[1], n_dr)
    ths = np.linspace(-np.pi, np.pi, n_theta, endpoint=False)
    return [(float(d), float(t)) for d in drs for t in ths]


def grid_displacement(dr: float, theta: float) -> tuple:
    return (dr * math.cos(theta), dr * math.sin(theta))


def episode_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, index]))


@dataclass
class SweepResult:
    method: str
    rows: list

    def __len__(self):
        return len(self.rows)

    def aggregate(self) -> dict:
        return aggregate(self.rows)


def _stats(vals):
    v = np.array([x for x in vals if x is not None], float)
    if v.size == 0:
        return (float("nan"), float("nan"))
    return (float(np.mean(v)), float(np.std(v, ddof=1)) if v.size > 1 else 0.0)


def aggregate(rows) -> dict:
    """Success ratio plus mean and standard deviation over successful episodes."""
    ok = [r for r in rows if r.success]
    return {
        "n": len(rows),
        "successes": len(ok),
        "rho": len(ok) / len(rows) if rows else float("nan"),
        "Ts": _stats(r.search_time for r in ok),
        "ls": _stats(r.search_length for r in ok),
        "Tc": _stats(r.cycle_time for r in ok),
        "eps": _stats(r.estimation_error for r in ok),
    }


def _run_indexed(args):
    index, cfg = args
    try:
        return run_episode(cfg, episode_rng(cfg.seed, index))
    except Exception as exc:  # a crashing episode is a failed row
        return EpisodeMetrics(cfg.method, cfg.dr, cfg.theta, False,
                              fail_reason=f"error:{type(exc).__name__}")


def sweep_configs(method: str, base: EpisodeConfig | None = None, grid=None) -> list:
    base = base or EpisodeConfig()
    grid = experiment_grid() if grid is None else grid
    return [replace(base, method=method, e0=grid_displacement(d, t)) for d, t in grid]


def sweep(method: str, base: EpisodeConfig | None = None, grid=None, workers: int = 1) -> SweepResult:
    """Run every grid point; rows come back in grid order whatever ``workers`` is."""
    cfgs = sweep_configs(method, base, grid)
    jobs = list(enumerate(cfgs))
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            rows = list(ex.map(_run_indexed, jobs, chunksize=8))
    else:
        rows = [_run_indexed(j) for j in jobs]
    return SweepResult(method, rows)


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def csv_text(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow(r.row())
    return buf.getvalue()


def jsonl_text(rows) -> str:
    return "".join(json.dumps(r.as_dict(), sort_keys=False) + "\n" for r in rows)


def emit_results(result, path, fmt: str = "csv") -> Path:
    rows = result.rows if isinstance(result, SweepResult) else list(result)
    if fmt == "csv":
        text = csv_text(rows)
    elif fmt in ("jsonl", "json-lines"):
        text = jsonl_text(rows)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    path = Path(path)
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return path


def read_results(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def trajectory_csv(records) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, TRAJECTORY_FIELDS, lineterminator="\n")
    w.writeheader()
    w.writerows(records)
    return buf.getvalue()


def trajectory_ndjson(records) -> str:
    return "".join(json.dumps(r) + "\n" for r in records)


def format_table(results: dict) -> str:
    """Side-by-side aggregate table, one line per method."""
    def pm(s, scale=1.0, nd=2):
        m, sd = s
        if math.isnan(m):
            return "-"
        return f"{m * scale:.{nd}f} ± {sd * scale:.{nd}f}"

    head = f"{'method':<10} {'rho':>9} {'T_s [s]':>17} {'l_s [cm]':>17} {'T_c [s]':>17} {'eps [deg]':>15}"
    lines = [head, "-" * len(head)]
    for name, agg in results.items():
        rho = f"{agg['successes']}/{agg['n']}"
        lines.append(f"{name:<10} {rho:>9} {pm(agg['Ts']):>17} {pm(agg['ls'], 100):>17} "
                     f"{pm(agg['Tc']):>17} {pm(agg['eps']):>15}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# configuration files
# ---------------------------------------------------------------------------

_GAIN_KEYS = ("approach", "tilt", "move", "insert")


def _convert(default, text: str):
    if isinstance(default, bool):
        return text.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    if isinstance(default, tuple):
        return tuple(float(x) for x in text.replace(",", " ").split())
    return text.strip()


def _apply(obj, section, skip=()):
    kw = {}
    names = {f.name for f in fields(obj)}
    for key, text in section.items():
        if key in skip:
            continue
        if key not in names:
            raise ValueError(f"unknown key {key!r} in section [{section.name}]")
        kw[key] = _convert(getattr(obj, key), text)
    return replace(obj, **kw) if kw else obj


def load_config(path=None, text: str | None = None) -> EpisodeConfig:
    """Read an INI file with sections geometry, sim, control, spiral, lissajous, episode."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    if text is not None:
        cp.read_string(text)
    elif path is not None:
        with open(path) as fh:
            cp.read_file(fh)
    known = {"geometry", "sim", "control", "spiral", "lissajous", "episode"}
    extra = set(cp.sections()) - known
    if extra:
        raise ValueError(f"unknown config sections: {sorted(extra)}")
    base = EpisodeConfig()
    geom = _apply(base.geom, cp["geometry"]) if cp.has_section("geometry") else base.geom
    sim = _apply(base.sim, cp["sim"]) if cp.has_section("sim") else base.sim
    ctrl = base.control
    if cp.has_section("control"):
        sec = cp["control"]
        gain_keys = {f"{g}_{kind}" for g in _GAIN_KEYS for kind in ("stiffness", "damping")}
        ctrl = _apply(ctrl, sec, skip=gain_keys)
        for g in _GAIN_KEYS:
            cur = getattr(ctrl, f"{g}_gains")
            st = sec.get(f"{g}_stiffness")
            dm = sec.get(f"{g}_damping")
            if st or dm:
                new = Gains(_convert(cur.stiffness, st) if st else cur.stiffness,
                            _convert(cur.damping, dm) if dm else cur.damping)
                if len(new.stiffness) != 6 or len(new.damping) != 6:
                    raise ValueError(f"{g} gains need 6 values")
                ctrl = replace(ctrl, **{f"{g}_gains": new})
    if cp.has_section("spiral"):
        ctrl = replace(ctrl, spiral=_apply(SpiralParams(), cp["spiral"]))
    if cp.has_section("lissajous"):
        ctrl = replace(ctrl, lissajous=_apply(LissajousParams(), cp["lissajous"]))
    ep = {}
    if cp.has_section("episode"):
        sec = cp["episode"]
        for key, text in sec.items():
            if key == "time_limit":
                ep[key] = float(text)
            elif key == "seed":
                ep[key] = int(text)
            elif key == "method":
                ep[key] = text.strip()
            else:
                raise ValueError(f"unknown key {key!r} in section [episode]")
    return replace(base, geom=geom, sim=sim, control=ctrl, **ep)
