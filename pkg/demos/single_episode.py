"""Walk through one active-search episode and print what the controller saw.

    python3 demos/single_episode.py
"""
import math

import numpy as np

from peghole.harness import EpisodeConfig, grid_displacement, run_episode

e0 = grid_displacement(6.6e-3, math.radians(-137))
m = run_episode(EpisodeConfig(e0=e0, record=True))

print(f"initial offset |e0| = {np.hypot(*e0) * 1e3:.2f} mm at {math.degrees(math.atan2(e0[1], e0[0])):.0f} deg")
t_prev = None
for rec in m.trajectory:
    if rec["fsm_state"] != t_prev:
        print(f"  t = {rec['time_s']:6.2f} s  {rec['fsm_state']:<8} contact: {rec['contact_mode']}")
        t_prev = rec["fsm_state"]
print(f"success={m.success}  search time {m.search_time:.2f} s  "
      f"search path {m.search_length * 1e3:.2f} mm  direction error {m.estimation_error:.2e} deg")
