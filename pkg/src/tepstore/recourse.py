"""Operations with investments held fixed.

Each representative day is solved on its own (investments are fixed, so
days decouple) and the per-hour results are gathered into a
:class:`RecourseReport`. Without storage every day is an LP; with storage
the charge/discharge binaries remain and the MILP solver handles them.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .grid import GridCase
from .milp import SolverSettings
from .scenarios import ScenarioSet
from .tep import InvestmentState, PlanConfig, build_model, decode_solution, upgrade_step

log = logging.getLogger(__name__)

EPS_CURT = 1e-3        # pu*h per day before curtailment flags a node
SHED_TOL = 1e-9        # pu*h per day; anything above counts as shed
CONGESTION_TOL = 1e-4  # pu


class RecourseError(RuntimeError):
    """The recourse problem failed to solve (it is always feasible)."""


@dataclass(frozen=True, eq=False)
class RecourseReport:
    """Per-hour diagnostics of a fixed-investment operation.

    Attributes
    ----------
    shed, curtailed : ndarray, shape (k, T, n_bus)
        Unserved load and curtailed renewable energy, pu*h per hour.
    overserved : ndarray, shape (k, T, n_bus)
    flow : ndarray, shape (k, T, n_branch)
        Branch flows, pu.
    limit : ndarray, shape (n_branch,)
        Effective thermal limit including upgrades, pu (inf when unrated).
    congested : ndarray of bool, shape (k, T, n_branch)
    weights : ndarray, shape (k,)
    genex, penalty_cost : ndarray, shape (k,)
        Yearly-weighted dollars contributed by each day.
    """

    day_ids: tuple
    weights: np.ndarray
    shed: np.ndarray
    overserved: np.ndarray
    curtailed: np.ndarray
    flow: np.ndarray
    limit: np.ndarray
    congested: np.ndarray
    genex: np.ndarray
    penalty_cost: np.ndarray
    statuses: tuple
    base_mva: float = 100.0
    days_per_year: int = 365

    @property
    def k(self) -> int:
        return len(self.day_ids)

    @property
    def opex(self) -> float:
        return float(self.genex.sum() + self.penalty_cost.sum())

    def daily_shed(self) -> np.ndarray:
        """pu*h of shed per (day, bus)."""
        return self.shed.sum(axis=1)

    def daily_curtailed(self) -> np.ndarray:
        return self.curtailed.sum(axis=1)

    def shed_nodes(self, day: int, tol: float = SHED_TOL) -> set[int]:
        return set(np.flatnonzero(self.daily_shed()[day] > tol).tolist())

    def curtailed_nodes(self, day: int, eps: float = EPS_CURT) -> set[int]:
        return set(np.flatnonzero(self.daily_curtailed()[day] > eps).tolist())

    def congested_branches(self) -> set[int]:
        return set(np.flatnonzero(self.congested.any(axis=(0, 1))).tolist())

    def _yearly(self, arr: np.ndarray) -> np.ndarray:
        return self.base_mva * np.einsum("s,stn->n", self.days_per_year * self.weights, arr)

    def node_shed_mwh(self) -> np.ndarray:
        """Annual shed per bus, MWh."""
        return self._yearly(self.shed)

    def node_curtailed_mwh(self) -> np.ndarray:
        return self._yearly(self.curtailed)

    @property
    def total_shed_mwh(self) -> float:
        return float(self.node_shed_mwh().sum())

    @property
    def total_curtailed_mwh(self) -> float:
        return float(self.node_curtailed_mwh().sum())


def _single_day(scenarios: ScenarioSet, s: int) -> ScenarioSet:
    return ScenarioSet((scenarios.day_ids[s],), np.array([1.0]),
                       demand=scenarios.demand[s:s + 1], p_max=scenarios.p_max[s:s + 1],
                       p_min=scenarios.p_min[s:s + 1])


def fixed_model(case: GridCase, scenarios: ScenarioSet, config: PlanConfig,
                investments: InvestmentState | None, name: str = "recourse"):
    """Planning model with every first-stage column pinned to ``investments``."""
    inv = investments if investments is not None else InvestmentState.empty(case)
    model = build_model(case, scenarios, config, candidates=(), carry=inv, name=name)
    upper = model.upper.copy()
    for j, nm in enumerate(model.var_names):
        if nm.startswith(("gamma_", "sigma_", "spr_", "ser_")) and nm.count("_") == 1:
            upper[j] = model.lower[j]
    return model.with_bounds(upper=upper)


def evaluate(case: GridCase, scenarios: ScenarioSet, config: PlanConfig,
             investments: InvestmentState | None = None,
             solver: SolverSettings | None = None) -> RecourseReport:
    """Solve the operations problem for every day with ``investments`` fixed.

    Parameters
    ----------
    investments : InvestmentState, optional
        Defaults to no investment at all.
    """
    solver = solver or SolverSettings()
    inv = investments if investments is not None else InvestmentState.empty(case)
    inv.check(case, config)
    k, T = scenarios.k, scenarios.T
    nb, ne = case.n_bus, case.n_branch
    arr = case.arrays
    shed = np.zeros((k, T, nb))
    over = np.zeros((k, T, nb))
    curt = np.zeros((k, T, nb))
    flow = np.zeros((k, T, ne))
    genex = np.zeros(k)
    penalty = np.zeros(k)
    statuses = []
    for s in range(k):
        day = _single_day(scenarios, s)
        model = fixed_model(case, day, config, inv, name=f"recourse_d{s}")
        result = solver.solve(model)
        if not result.has_solution:
            raise RecourseError(f"recourse day {s} returned status {result.status}")
        sol = decode_solution(model, case, day, config, result)
        sch = sol.schedule
        shed[s] = sch.shed[0]
        over[s] = sch.over[0]
        flow[s] = sch.pf[0]
        gen_curt = (day.p_max[0] - sch.pg[0]).clip(min=0.0) * arr.renewable[None, :]
        np.add.at(curt[s], (slice(None), arr.gen_bus), gen_curt)
        genex[s] = sol.genex * scenarios.weights[s]
        penalty[s] = sol.penalty_cost * scenarios.weights[s]
        statuses.append(result.status)
    limit = arr.rating + inv.gamma * upgrade_step(case, config)
    congested = np.abs(flow) >= limit[None, None, :] - CONGESTION_TOL
    return RecourseReport(scenarios.day_ids, scenarios.weights, shed, over, curt, flow, limit,
                          congested, genex, penalty, tuple(statuses), case.base_mva,
                          config.days_per_year)
