"""Multi-stage investment studies.

For each stage year the case is scaled, representative days are rebuilt
with that year's load factor, storage candidates are found from a
recourse run that already includes earlier investments, and the planning
model is solved with those investments as lower bounds. Results feed the
next stage. Sweeps repeat the whole horizon with scaled storage costs.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

from .candidates import INTERSECTION, CandidateSet, select_candidates
from .grid import PROJECTIONS, GridCase, ScalingTable, scale_case, unscaled_kinds
from .milp import BINARY, INTEGER, SolveResult, SolverSettings
from .milp.external import ExternalSolverError
from .recourse import evaluate
from .scenarios import ScenarioSet, YearSeries, build_scenarios, cluster_days
from .tep import (CONFIGS, TEP_ONLY, InvestmentState, PlanConfig, PlanSolution, build_model,
                  decode_solution)

log = logging.getLogger(__name__)

SOLVER_ERROR = "solver_error"

ROW_FIELDS = (
    "config", "multiplier", "year", "status", "objective", "gap",
    "lines", "max_level_lines", "storage_units", "storage_gwh", "storage_gw",
    "candidates", "binaries", "integers",
    "capex_lines", "capex_storage", "genex", "penalty_cost", "load_shed_mwh", "curtailment_mwh",
)


@dataclass(frozen=True)
class PlanningHorizon:
    """Stage years, scaling table, clustering settings and cost sweep."""

    years: tuple = (2030, 2035, 2040, 2045, 2050)
    table: ScalingTable = PROJECTIONS
    k: int = 5
    seed: int = 0
    multipliers: tuple = (1.0,)
    candidate_rule: str = INTERSECTION

    def __post_init__(self):
        years = tuple(int(y) for y in self.years)
        mults = tuple(float(m) for m in self.multipliers)
        if not years:
            raise ValueError("horizon needs at least one stage")
        if any(b <= a for a, b in zip(years, years[1:])):
            raise ValueError("stage years must be strictly increasing")
        if not mults or any(not m > 0 for m in mults):
            raise ValueError("storage cost multipliers must be positive")
        if self.k < 1:
            raise ValueError("k must be at least 1")
        object.__setattr__(self, "years", years)
        object.__setattr__(self, "multipliers", mults)


@dataclass
class StageOutcome:
    """Everything produced for one (config, multiplier, year)."""

    config: str
    multiplier: float
    year: int
    row: dict
    scenarios: ScenarioSet
    candidates: CandidateSet | None
    solution: PlanSolution | None
    cumulative: InvestmentState
    wall_time: float = 0.0


@dataclass
class StudyResult:
    stages: list = field(default_factory=list)

    @property
    def rows(self) -> list[dict]:
        return [st.row for st in self.stages]

    def select(self, config=None, multiplier=None) -> list[StageOutcome]:
        return [st for st in self.stages
                if (config is None or st.config == config)
                and (multiplier is None or st.multiplier == multiplier)]


def summary_row(config: str, mult: float, year: int, case: GridCase, plan_cfg: PlanConfig,
                model, result, solution: PlanSolution | None, cumulative: InvestmentState,
                n_candidates: int) -> dict:
    row = dict.fromkeys(ROW_FIELDS)
    row.update(config=config, multiplier=mult, year=year, status=result.status,
               candidates=n_candidates, binaries=model.count(BINARY), integers=model.count(INTEGER))
    row["objective"] = result.objective if math.isfinite(result.objective) else None
    row["gap"] = result.gap if math.isfinite(result.gap) else None
    row["lines"] = int((cumulative.gamma > 0).sum())
    row["max_level_lines"] = int((cumulative.gamma >= plan_cfg.upgrade_levels).sum()) \
        if plan_cfg.upgrade_levels > 0 else 0
    row["storage_units"] = int(cumulative.sigma.sum())
    row["storage_gwh"] = float(cumulative.energy.sum()) / 1000.0
    row["storage_gw"] = float(cumulative.power.sum()) / 1000.0
    if solution is not None:
        row.update(capex_lines=solution.capex_lines, capex_storage=solution.capex_storage,
                   genex=solution.genex, penalty_cost=solution.penalty_cost,
                   load_shed_mwh=solution.load_shed, curtailment_mwh=solution.curtailment)
    return row


def run_horizon(case: GridCase, series: YearSeries, horizon: PlanningHorizon,
                config: PlanConfig, solver: SolverSettings | None = None,
                multiplier: float = 1.0, clustering: ScenarioSet | None = None) -> list[StageOutcome]:
    """Run every stage of ``horizon`` for one configuration and cost multiplier."""
    solver = solver or SolverSettings()
    cfg = config.with_storage_cost_multiplier(multiplier) if multiplier != 1.0 else config
    clustering = clustering or cluster_days(series, horizon.k, horizon.seed)
    missing = unscaled_kinds(case, horizon.table)
    if missing:
        log.warning("generator kinds without scaling factors (left at 1.0): %s", ", ".join(missing))
    carry = InvestmentState.empty(case)
    out = []
    for year in horizon.years:
        start = time.monotonic()
        scaled, load_factor = scale_case(case, horizon.table, year)
        scen = build_scenarios(scaled, series, clustering, load_factor)
        cands = None
        if cfg.builds_storage:
            report = evaluate(scaled, scen, cfg, carry, solver)
            cands = select_candidates(report, horizon.candidate_rule)
            log.info("%s x%g %d: |SC| = %d", cfg.config, multiplier, year, len(cands))
        model = build_model(scaled, scen, cfg, sorted(cands.buses) if cands else (), carry,
                            name=f"{cfg.config}_{year}")
        try:
            result = solver.solve(model)
        except ExternalSolverError as exc:
            log.error("%s %d: external solver failed: %s", cfg.config, year, exc)
            result = SolveResult(SOLVER_ERROR, math.nan, None, math.nan, math.nan)
        solution = None
        if result.has_solution:
            solution = decode_solution(model, scaled, scen, cfg, result)
            carry = solution.investments
        else:
            log.warning("%s %d: no solution (%s); investments carried unchanged",
                        cfg.config, year, result.status)
        elapsed = time.monotonic() - start
        log.info("%s x%g %d: %s in %.2f s, %d binaries", cfg.config, multiplier, year,
                 result.status, elapsed, model.count(BINARY))
        row = summary_row(cfg.config, multiplier, year, scaled, cfg, model, result, solution,
                          carry, len(cands) if cands is not None else 0)
        out.append(StageOutcome(cfg.config, multiplier, year, row, scen, cands, solution, carry,
                                elapsed))
    return out


def run_study(case: GridCase, series: YearSeries, horizon: PlanningHorizon,
              config: PlanConfig, solver: SolverSettings | None = None,
              configs=None) -> StudyResult:
    """Run the horizon for each configuration and storage-cost multiplier.

    ``configs`` defaults to the configuration named in ``config``. The
    multiplier sweep is skipped for ``tep_only``, which has no storage
    costs to scale.
    """
    configs = tuple(configs) if configs else (config.config,)
    for c in configs:
        if c not in CONFIGS:
            raise ValueError(f"unknown configuration {c!r}")
    clustering = cluster_days(series, horizon.k, horizon.seed)
    result = StudyResult()
    for c in configs:
        mults = (1.0,) if c == TEP_ONLY else horizon.multipliers
        for mult in mults:
            result.stages += run_horizon(case, series, horizon, config.with_config(c), solver,
                                         mult, clustering)
    return result


def monotone_cumulative(stages: list[StageOutcome]) -> bool:
    """True when upgrade levels and storage never decrease across stages."""
    for a, b in zip(stages, stages[1:]):
        if (b.cumulative.gamma < a.cumulative.gamma).any():
            return False
        if (b.cumulative.sigma < a.cumulative.sigma).any():
            return False
        if (b.cumulative.energy < a.cumulative.energy - 1e-6).any():
            return False
    return True
