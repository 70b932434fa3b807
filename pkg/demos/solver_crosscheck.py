"""
Cross-checking the built-in solver against HiGHS
=================================================

Build the 6-bus 2040 model, write it as MPS, read it back, and solve the
copy with the bundled HiGHS runner while the original goes through the
built-in branch-and-bound. Both should land within the requested gap.

Run with ``python3 demos/solver_crosscheck.py``. Needs ``highspy``.
"""

import tempfile
import time
from pathlib import Path

from tepstore import grid, scenarios, tep
from tepstore.manifest import bundled_path
from tepstore.milp import BINARY, SolveOptions, solve
from tepstore.milp.dispatch import highs_command
from tepstore.milp.external import solve_external
from tepstore.milp.mps import read_mps, write_mps

case = grid.parse_case(bundled_path("case6_tep.m"))
scaled, lf = grid.scale_case(case, grid.PROJECTIONS, 2040)
series = scenarios.synthetic_series(case, 30, seed=1)
scen = scenarios.build_scenarios(scaled, series, scenarios.cluster_days(series, 2), lf)
model = tep.build_model(scaled, scen, tep.PlanConfig(), [2, 3])
print(f"{model.num_vars} columns, {model.num_cons} rows, {model.count(BINARY)} binaries")

# Round trip through a file.
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "case6_2040.mps"
    write_mps(model, path)
    back = read_mps(path)
    print(f"MPS file {path.stat().st_size:,} bytes; identical after reading: {back.same_as(model)}")

options = SolveOptions(mip_gap=0.01)

t0 = time.perf_counter()
ours = solve(model, options)
t1 = time.perf_counter()
theirs = solve_external(back, highs_command(options))
t2 = time.perf_counter()

print(f"built-in: {ours.status:<10} {ours.objective:,.0f}  bound {ours.bound:,.0f}  "
      f"{ours.nodes} nodes  {t1 - t0:.2f} s")
print(f"HiGHS:    {theirs.status:<10} {theirs.objective:,.0f}  {t2 - t1:.2f} s")
diff = abs(ours.objective - theirs.objective) / max(abs(ours.objective), abs(theirs.objective))
print(f"relative difference {diff:.2e}")
