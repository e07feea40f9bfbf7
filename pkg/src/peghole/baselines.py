"""Blind search paths: an Archimedean spiral and a Lissajous curve.

Both return horizontal offsets from the position where the search starts.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
import math

import numpy as np


@dataclass(frozen=True)
class SpiralParams:
    pitch: float = 1e-3        # radial gap between turns, m
    speed: float = 5e-3        # m/s along the path
    max_radius: float = 19.5e-3

    def __post_init__(self):
        if not (self.pitch > 0 and self.speed > 0 and self.max_radius > 0):
            raise ValueError("spiral parameters must be positive")

    @property
    def b(self) -> float:
        return self.pitch / (2 * math.pi)

    @property
    def phi_max(self) -> float:
        return self.max_radius / self.b

    @cached_property
    def length(self) -> float:
        return float(spiral_arclength(self.phi_max, self.b))

    @cached_property
    def duration(self) -> float:
        """Time to reach ``max_radius``; past it coverage is exhausted."""
        return self.length / self.speed

    def exhausted(self, t: float) -> bool:
        return t > self.duration


def spiral_arclength(phi, b):
    """Arc length of ``r = b phi`` from the origin to angle ``phi``."""
    phi = np.asarray(phi, float)
    return 0.5 * b * (phi * np.sqrt(1 + phi * phi) + np.arcsinh(phi))


def spiral_angle(s, b, iters: int = 50):
    """Invert :func:`spiral_arclength` by Newton's method."""
    s = np.asarray(s, float)
    phi = np.sqrt(2 * s / b)
    for _ in range(iters):
        f = spiral_arclength(phi, b) - s
        step = f / (b * np.sqrt(1 + phi * phi))
        phi = phi - step
        if np.all(np.abs(step) <= 1e-13 * np.maximum(1.0, np.abs(phi))):
            break
    return np.maximum(phi, 0.0)


def spiral_point(t, params: SpiralParams) -> np.ndarray:
    """Offset on the spiral after travelling ``speed * t`` along it.

    Times past :attr:`SpiralParams.duration` are clamped to the outer end.
    """
    if np.ndim(t) == 0:
        return _spiral_point_scalar(float(t), params)
    if np.any(np.asarray(t) < 0):
        raise ValueError("t must be non-negative")
    s = np.minimum(np.asarray(t, float) * params.speed, params.length)
    phi = spiral_angle(s, params.b)
    r = params.b * phi
    return np.stack([r * np.cos(phi), r * np.sin(phi)], axis=-1)


def _spiral_point_scalar(t: float, params: SpiralParams) -> np.ndarray:
    # scalar twin of the vectorized path, called once per controller tick
    if t < 0:
        raise ValueError("t must be non-negative")
    b = params.b
    s = min(t * params.speed, params.length)
    phi = math.sqrt(2 * s / b)
    for _ in range(50):
        f = 0.5 * b * (phi * math.sqrt(1 + phi * phi) + math.asinh(phi)) - s
        step = f / (b * math.sqrt(1 + phi * phi))
        phi -= step
        if abs(step) <= 1e-13 * max(1.0, abs(phi)):
            break
    phi = max(phi, 0.0)
    r = b * phi
    return np.array([r * math.cos(phi), r * math.sin(phi)])


@dataclass(frozen=True)
class LissajousParams:
    amp_x: float = 19.5e-3
    amp_y: float = 19.5e-3
    omega_x: float = 0.21      # rad/s
    omega_y: float = 0.20
    phase: float = 0.0


def lissajous_point(t, params: LissajousParams) -> np.ndarray:
    t = np.asarray(t, float)
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    x = params.amp_x * np.sin(params.omega_x * t + params.phase)
    y = params.amp_y * np.sin(params.omega_y * t)
    return np.stack([x, y], axis=-1)


def first_pass_within(path_fn, target, radius: float, t_end: float, dt: float = 0.01):
    """Earliest sampled time at which the path comes within ``radius`` of ``target``.

    Returns ``None`` if it never does before ``t_end``.
    """
    ts = np.arange(0.0, t_end + dt, dt)
    pts = path_fn(ts)
    d = np.hypot(pts[:, 0] - target[0], pts[:, 1] - target[1])
    hit = np.flatnonzero(d <= radius)
    return float(ts[hit[0]]) if hit.size else None
