"""Active search against spiral search on a coarse grid (a few seconds).

    python3 demos/compare_methods.py
"""
from peghole.harness import experiment_grid, format_table, sweep

grid = experiment_grid(n_dr=3, n_theta=8)
table = {m: sweep(m, grid=grid).aggregate() for m in ("active", "spiral")}
print(format_table(table))
a, s = table["active"], table["spiral"]
print(f"spiral/active search path ratio {s['ls'][0] / a['ls'][0]:.1f}, "
      f"search time ratio {s['Ts'][0] / a['Ts'][0]:.1f}")
