"""Contact-stability based peg-in-hole search on a quasi-static simulator."""
from .geom import (
    COINCIDENT,
    Chord,
    GeometryError,
    NoTiltDetected,
    PegHoleGeometry,
    RigidPose,
    chord_from_displacement,
    circle_intersection,
    displacement_from_chord,
    fit_tilt_axis,
    rot2,
)
from .harness import EpisodeConfig, EpisodeMetrics, SweepResult, run_episode, sweep
from .sim import SimConfig, WorldState, spawn, step

__all__ = [
    "COINCIDENT", "Chord", "GeometryError", "NoTiltDetected", "PegHoleGeometry", "RigidPose",
    "chord_from_displacement", "circle_intersection", "displacement_from_chord", "fit_tilt_axis",
    "rot2", "EpisodeConfig", "EpisodeMetrics", "SweepResult", "run_episode", "sweep",
    "SimConfig", "WorldState", "spawn", "step",
]
__version__ = "0.1.0"
