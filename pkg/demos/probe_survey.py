"""Apply each of the six tilt probes to a resting peg and report the outcome.

Probes on the supported side of the peg stay static; probes over the hole
tip the peg about the rim intersection line, whose normal points at the hole.

    python3 demos/probe_survey.py 0.01 0.7
"""
import math
import sys

import numpy as np

from peghole.geom import angle_between
from peghole.harness import grid_displacement, run_probe
from peghole.pomdp import Tilted

dr = float(sys.argv[1]) if len(sys.argv) > 1 else 0.01
theta = float(sys.argv[2]) if len(sys.argv) > 2 else 0.7
e = np.array(grid_displacement(dr, theta))
print(f"hole at {e * 1e3} mm from the peg axis")
for i in range(1, 7):
    out = run_probe(e, i)
    o = out.observation
    if isinstance(o, Tilted):
        err = math.degrees(angle_between(o.chord.normal, e))
        print(f"probe {i}: tilted, estimate {np.round(out.estimate * 1e3, 3)} mm, "
              f"direction error {err:.1e} deg")
    else:
        what = "slight tilt, below the angle threshold" if out.hinge is not None else "static"
        print(f"probe {i}: {what}")
