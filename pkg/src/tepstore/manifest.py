"""Study manifests: one JSON file describing a full planning study.

Example::

    {
      "case": "case6_tep.m",
      "series": {"load": "load.csv", "wind": "wind.csv", "solar": "solar.csv"},
      "years": [2030, 2035, 2040],
      "k": 5,
      "seed": 0,
      "configs": ["tep_storage", "tep_only", "storage_only"],
      "multipliers": [0.75, 1.0, 1.25, 1.5],
      "plan_config": {"penalty": 2500000.0},
      "scaling": "scaling.json",
      "solver": {"mip_gap": 0.01, "time_limit": 600, "external": null, "threshold": 1500}
    }

``series`` may instead be ``{"synthetic": {"days": 365, "seed": 1}}`` to
generate data with :func:`tepstore.scenarios.synthetic_series`. Relative
paths are resolved against the manifest's directory; the name
``"bundled:case6_tep.m"`` refers to the fixture shipped with the package.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .candidates import RULES
from .grid import PROJECTIONS, GridCase, ScalingTable, parse_case
from .milp import SolveOptions, SolverSettings
from .planner import PlanningHorizon
from .scenarios import YearSeries, read_series, synthetic_series
from .tep import CONFIGS, PlanConfig

_KEYS = {"case", "series", "years", "k", "seed", "configs", "config", "multipliers",
         "plan_config", "scaling", "solver", "candidate_rule"}


class ManifestError(ValueError):
    """Invalid study manifest."""


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("tepstore") / "data" / name))


def resolve_path(value: str, base: Path) -> Path:
    if value.startswith("bundled:"):
        p = bundled_path(value.split(":", 1)[1])
    else:
        p = Path(value)
        if not p.is_absolute():
            p = base / p
    if not p.exists():
        raise FileNotFoundError(f"file not found: {p}")
    return p


def load_series_spec(spec: dict, case: GridCase, base: Path) -> YearSeries:
    if not isinstance(spec, dict):
        raise ManifestError("'series' must be an object")
    if "synthetic" in spec:
        syn = spec["synthetic"] or {}
        return synthetic_series(case, int(syn.get("days", 365)), int(syn.get("seed", 0)),
                                str(syn.get("start", "2022-01-01")))
    if "load" not in spec:
        raise ManifestError("'series' needs a 'load' file or a 'synthetic' block")
    paths = {key: resolve_path(spec[key], base) for key in ("load", "wind", "solar", "hydro")
             if spec.get(key)}
    return read_series(paths["load"], paths.get("wind"), paths.get("solar"), paths.get("hydro"))


@dataclass
class StudyManifest:
    case: GridCase
    series: YearSeries
    horizon: PlanningHorizon
    plan_config: PlanConfig
    solver: SolverSettings
    configs: tuple = field(default_factory=tuple)

    @classmethod
    def load(cls, path) -> "StudyManifest":
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"manifest not found: {path}")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{path}: {exc}") from None
        return cls.from_dict(data, path.parent)

    @classmethod
    def from_dict(cls, data: dict, base: Path = Path(".")) -> "StudyManifest":
        unknown = set(data) - _KEYS
        if unknown:
            raise ManifestError(f"unknown manifest keys: {sorted(unknown)}")
        if "case" not in data or "series" not in data:
            raise ManifestError("manifest needs 'case' and 'series'")
        case = parse_case(resolve_path(data["case"], base))
        series = load_series_spec(data["series"], case, base)
        table = PROJECTIONS
        if data.get("scaling"):
            table = ScalingTable.load_json(resolve_path(data["scaling"], base))
        configs = data.get("configs") or [data.get("config", "tep_storage")]
        if isinstance(configs, str):
            configs = [configs]
        bad = [c for c in configs if c not in CONFIGS]
        if bad:
            raise ManifestError(f"unknown configurations {bad}; expected {list(CONFIGS)}")
        rule = data.get("candidate_rule", "intersection")
        if rule not in RULES:
            raise ManifestError(f"candidate_rule must be one of {list(RULES)}")
        try:
            horizon = PlanningHorizon(tuple(data.get("years", (2030, 2035, 2040, 2045, 2050))),
                                      table, int(data.get("k", 5)), int(data.get("seed", 0)),
                                      tuple(data.get("multipliers", (1.0,))), rule)
            plan_cfg = PlanConfig.from_dict(dict(data.get("plan_config") or {}))
        except (TypeError, ValueError) as exc:
            raise ManifestError(str(exc)) from None
        if horizon.k > series.n_days:
            raise ManifestError(f"k = {horizon.k} exceeds the {series.n_days} days of series data")
        missing_years = [y for y in horizon.years if y != table.base_year and y not in table.load]
        if missing_years:
            raise ManifestError(f"scaling table has no factors for {missing_years}")
        solver = solver_from_dict(data.get("solver") or {})
        return cls(case, series, horizon, plan_cfg, solver, tuple(configs))


def solver_from_dict(d: dict) -> SolverSettings:
    unknown = set(d) - {"mip_gap", "time_limit", "external", "threshold"}
    if unknown:
        raise ManifestError(f"unknown solver keys: {sorted(unknown)}")
    tl = d.get("time_limit")
    opts = SolveOptions(mip_gap=float(d.get("mip_gap", 0.01)),
                        time_limit=math.inf if tl is None else float(tl))
    if not 0 <= opts.mip_gap < 1 or not opts.time_limit > 0:
        raise ManifestError("solver needs 0 <= mip_gap < 1 and a positive time limit")
    kw = {"options": opts, "external": d.get("external")}
    if d.get("threshold") is not None:
        kw["threshold"] = int(d["threshold"])
    return SolverSettings(**kw)
