"""Transmission expansion planning with battery storage siting.

The pipeline: parse a MATPOWER case (:mod:`tepstore.grid`), scale it to a
planning year and reduce a year of hourly data to weighted representative
days (:mod:`tepstore.scenarios`), find storage candidate buses from a
fixed-investment operations run (:mod:`tepstore.recourse`,
:mod:`tepstore.candidates`), then build and solve the two-stage MILP
(:mod:`tepstore.tep`, :mod:`tepstore.milp`). :mod:`tepstore.planner`
chains stages across a horizon.
"""

from .candidates import CandidateSet, augment_candidates, select_candidates
from .grid import PROJECTIONS, GridCase, ScalingTable, parse_case, parse_case_text, scale_case
from .milp import SolveOptions, SolverSettings
from .planner import PlanningHorizon, run_horizon, run_study
from .recourse import RecourseReport, evaluate
from .scenarios import ScenarioSet, YearSeries, build_scenarios, cluster_days
from .tep import InvestmentState, PlanConfig, PlanSolution, build_model, decode_solution

__version__ = "0.1.0"

__all__ = [
    "CandidateSet", "GridCase", "InvestmentState", "PlanConfig", "PlanSolution",
    "PlanningHorizon", "RecourseReport", "ScalingTable", "ScenarioSet", "SolveOptions",
    "SolverSettings", "PROJECTIONS", "YearSeries", "augment_candidates", "build_model",
    "build_scenarios", "cluster_days", "decode_solution", "evaluate", "parse_case",
    "parse_case_text", "run_horizon", "run_study", "scale_case", "select_candidates",
]
