"""
Growing the storage candidate set after a first plan
=====================================================

Two leaf buses hang off a large coal unit. Bus A runs short at the evening
peak every day, bus B only on one day out of five. The intersection rule
keeps A alone, the first storage-only plan fixes A, and a second recourse
run exposes B. Augmenting the set and planning again brings B in.

Run with ``python3 demos/candidate_augmentation.py``.
"""

import numpy as np

from tepstore.candidates import augment_candidates, select_candidates
from tepstore.grid import parse_case_text
from tepstore.milp import SolveOptions, SolverSettings
from tepstore.recourse import evaluate
from tepstore.scenarios import ScenarioSet
from tepstore.tep import STORAGE_ONLY, PlanConfig, build_model, decode_solution

CASE = """
function mpc = leaves
mpc.baseMVA = 100;
mpc.bus = [
    1 3 0 0 0 0 1 1 0 230 1 1.1 0.9;
    2 1 0 0 0 0 1 1 0 230 1 1.1 0.9;
    3 1 0 0 0 0 1 1 0 230 1 1.1 0.9;
];
mpc.gen = [
    1 0 0 0 0 1 100 1 500 0;
];
mpc.branch = [
    1 2 0 0.1 0 50 50 50 0 0 1 -360 360;
    1 3 0 0.1 0 50 50 50 0 0 1 -360 360;
];
mpc.gencost = [
    2 0 0 2 20 0;
];
mpc.genfuel = {'coal'};
"""

case = parse_case_text(CASE, "leaves")
A, B = 1, 2

# Five days of four hours. A peaks at 70 MW every evening; B reaches
# 60 MW only on day 3. Both sit behind 50 MW lines.
a = [20, 20, 70, 30]
b_normal, b_peak = [30, 30, 40, 30], [30, 30, 60, 30]
demand_mw = np.array([[[0, a[t], (b_peak if d == 2 else b_normal)[t]] for t in range(4)]
                      for d in range(5)], dtype=float)
k, T = demand_mw.shape[:2]
p_max = np.broadcast_to(case.arrays.p_max, (k, T, case.n_gen)).copy()
scen = ScenarioSet(tuple(range(k)), np.full(k, 1 / k), demand=demand_mw / case.base_mva,
                   p_max=p_max, p_min=np.zeros_like(p_max))

cfg = PlanConfig(config=STORAGE_ONLY)
solver = SolverSettings(SolveOptions(mip_gap=1e-6))


def plan(candidates):
    model = build_model(case, scen, cfg, sorted(candidates.buses))
    return decode_solution(model, case, scen, cfg, solver.solve(model))


# Shed per day and bus before any investment.
report = evaluate(case, scen, cfg, None, solver)
print("shed per day (MWh), buses A and B:")
print(np.round(report.daily_shed()[:, [A, B]] * case.base_mva, 2))

first = select_candidates(report, "intersection")
print("\nintersection:", sorted(first.buses), " union:",
      sorted(select_candidates(report, "union").buses))

sol = plan(first)
print(f"first plan: storage at {sol.investments.storage_sites.tolist()}, "
      f"{sol.investments.energy[A]:.1f} MWh at A, shed {sol.load_shed:,.0f} MWh/yr")

# Evaluate the plan. A is served, B still sheds on its bad day.
post = evaluate(case, scen, cfg, sol.investments, solver)
print("shed after the first plan (MWh):")
print(np.round(post.daily_shed()[:, [A, B]] * case.base_mva, 2))

grown = augment_candidates(first, post)
print("\naugmented set:", {b: sorted(t) for b, t in grown.provenance.items()})

second = plan(grown)
print(f"second plan: storage at {second.investments.storage_sites.tolist()}, "
      f"shed {second.load_shed:,.0f} MWh/yr, total ${second.total_cost:,.0f} "
      f"(first ${sol.total_cost:,.0f})")
