"""
One planning stage on the bundled 6-bus Texas case
===================================================

Parse the case, project it to 2040, pick representative days, look for
storage candidates with a no-investment recourse run, then plan lines and
storage together and check what the plan fixed.

Run with ``python3 demos/case6_walkthrough.py``.
"""

import numpy as np

from tepstore import grid, recourse, scenarios, tep
from tepstore.candidates import select_candidates
from tepstore.manifest import bundled_path
from tepstore.milp import SolveOptions, SolverSettings

# The case ships with coordinates, so branch lengths are real distances.
case = grid.parse_case(bundled_path("case6_tep.m"))
print(f"{case.name}: {case.n_bus} buses, {case.n_branch} branches")
for br in case.branches:
    a, b = case.buses[br.from_bus].name, case.buses[br.to_bus].name
    print(f"  {a:>12} - {b:<12} {br.length:7.1f} km  {br.thermal_limit * case.base_mva:5.0f} MW")

# Scale capacities and load to 2040.
scaled, load_factor = grid.scale_case(case, grid.PROJECTIONS, 2040)
print(f"\n2040 load factor {load_factor}")

# A synthetic year stands in for measured series; three medoid days
# summarise it.
series = scenarios.synthetic_series(case, 365, seed=7)
clustering = scenarios.cluster_days(series, 3, seed=0)
scen = scenarios.build_scenarios(scaled, series, clustering, load_factor)
for row in scenarios.representative_day_table(series, scen):
    print(f"  day {row['date']}  weight {row['weight']:.3f}")

# Recourse with no investment shows where the grid falls short.
cfg = tep.PlanConfig()
solver = SolverSettings(SolveOptions(mip_gap=0.005))
before = recourse.evaluate(scaled, scen, cfg, None, solver)
print(f"\nno investment: {before.total_shed_mwh:,.0f} MWh/yr shed, "
      f"{before.total_curtailed_mwh:,.0f} MWh/yr curtailed")
print("congested branches:", sorted(case.branches[e].id for e in before.congested_branches()))

# Buses in trouble on every representative day become storage candidates.
cands = select_candidates(before, "intersection")
print("storage candidates:", [case.buses[b].name for b in cands])

# Plan lines and storage together.
model = tep.build_model(scaled, scen, cfg, sorted(cands.buses))
sol = tep.decode_solution(model, scaled, scen, cfg, solver.solve(model))
inv = sol.investments
print(f"\n{sol.solver.status}, gap {sol.solver.gap:.2e}")
for e in np.flatnonzero(inv.gamma):
    print(f"  upgrade branch {case.branches[e].id} to level {inv.gamma[e]}")
for i in inv.storage_sites:
    print(f"  storage at {case.buses[i].name}: {inv.power[i]:.1f} MW / {inv.energy[i]:.1f} MWh")
print(f"capex ${sol.capex:,.0f}  opex ${sol.opex:,.0f}")

# Re-evaluating the same investments day by day reproduces the plan's
# opex up to the solver gap.
after = recourse.evaluate(scaled, scen, cfg, inv, solver)
print(f"with the plan: {after.total_shed_mwh:,.0f} MWh/yr shed, opex ${after.opex:,.0f}")
