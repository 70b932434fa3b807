"""Command-line interface.

Subcommands: ``parse``, ``cluster``, ``candidates``, ``plan``, ``evaluate``,
``study`` and ``export-mps``. Outputs go to ``--out`` (default: the
``TEPSTORE_OUTPUT_DIR`` environment variable, else ``./tepstore-out``).

Exit codes: 0 success, 2 input or configuration error, 3 solve failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

from . import export
from .candidates import RULES, CandidateSet, select_candidates
from .grid import PROJECTIONS, CaseParseError, CaseStructureError, ScalingTable, parse_case, scale_case
from .manifest import ManifestError, StudyManifest, resolve_path
from .milp import BINARY, SolveOptions, SolverSettings
from .milp.external import ExternalSolverError
from .milp.mps import write_mps
from .planner import run_study
from .recourse import RecourseError, evaluate
from .scenarios import (SeriesError, build_scenarios, cluster_days, read_series,
                        representative_day_table, synthetic_series)
from .tep import CONFIGS, BuildError, DecodeError, InvestmentState, PlanConfig, build_model, decode_solution

log = logging.getLogger("tepstore")

OUTPUT_ENV = "TEPSTORE_OUTPUT_DIR"
EXIT_OK, EXIT_INPUT, EXIT_SOLVE = 0, 2, 3


class SolveFailure(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Argument plumbing


def _positive(kind):
    def parse(text):
        v = kind(text)
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return v
    return parse


def _gap(text):
    v = float(text)
    if not 0 <= v < 1:
        raise argparse.ArgumentTypeError("gap must lie in [0, 1)")
    return v


def _add_output(p):
    p.add_argument("--out", type=Path, default=None,
                   help=f"output directory (default: ${OUTPUT_ENV} or ./tepstore-out)")


def _add_series(p):
    g = p.add_argument_group("time series")
    g.add_argument("--load", help="hourly bus load CSV (MW)")
    g.add_argument("--wind", help="hourly wind availability CSV")
    g.add_argument("--solar", help="hourly solar availability CSV")
    g.add_argument("--hydro", help="hourly hydro availability CSV")
    g.add_argument("--synthetic-days", type=_positive(int), default=None,
                   help="generate this many days of synthetic data instead of reading CSVs")
    g.add_argument("--synthetic-seed", type=int, default=0)


def _add_scenario(p):
    p.add_argument("--year", type=int, default=2030, help="planning year for scaling")
    p.add_argument("--scaling", help="JSON scaling table (default: built-in projections)")
    p.add_argument("--k", type=_positive(int), default=5, help="representative days")
    p.add_argument("--seed", type=int, default=0, help="clustering seed")


def _add_plan(p):
    p.add_argument("--config", choices=CONFIGS, default="tep_storage")
    p.add_argument("--plan-config", help="JSON file overriding cost and technology parameters")
    p.add_argument("--storage-cost-mult", type=_positive(float), default=1.0)
    p.add_argument("--gap", type=_gap, default=0.01, help="relative MIP gap")
    p.add_argument("--time-limit", type=_positive(float), default=None, help="seconds per solve")
    p.add_argument("--external-solver", default=None,
                   help="command run as '<cmd> <model.mps> <solution.out>'")
    p.add_argument("--threshold", type=int, default=None,
                   help="columns above which the external solver is used")
    p.add_argument("--rule", choices=RULES, default="intersection", help="candidate rule")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tepstore", description="Transmission and storage expansion planning")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="parse a case and summarise it")
    p.add_argument("case")
    _add_output(p)

    p = sub.add_parser("cluster", help="select representative days")
    p.add_argument("case")
    _add_series(p)
    _add_scenario(p)
    _add_output(p)

    p = sub.add_parser("candidates", help="find storage candidate buses")
    p.add_argument("case")
    _add_series(p)
    _add_scenario(p)
    _add_plan(p)
    p.add_argument("--investments", help="solution JSON whose investments stay in place")
    _add_output(p)

    p = sub.add_parser("plan", help="solve one planning stage")
    p.add_argument("case")
    _add_series(p)
    _add_scenario(p)
    _add_plan(p)
    p.add_argument("--candidates", help="candidates JSON (default: computed from a recourse run)")
    p.add_argument("--investments", help="solution JSON whose investments are carried forward")
    _add_output(p)

    p = sub.add_parser("evaluate", help="operations with fixed investments")
    p.add_argument("case")
    _add_series(p)
    _add_scenario(p)
    _add_plan(p)
    p.add_argument("--investments", help="solution JSON (default: no investments)")
    _add_output(p)

    p = sub.add_parser("study", help="run a multi-stage study from a manifest")
    p.add_argument("manifest")
    _add_output(p)

    p = sub.add_parser("export-mps", help="write the planning model as MPS")
    p.add_argument("case")
    _add_series(p)
    _add_scenario(p)
    _add_plan(p)
    p.add_argument("--candidates", help="candidates JSON (default: computed from a recourse run)")
    p.add_argument("--investments", help="solution JSON whose investments are carried forward")
    p.add_argument("--mps-name", default="model.mps")
    _add_output(p)
    return ap


def _out_dir(args) -> Path:
    out = args.out or Path(os.environ.get(OUTPUT_ENV) or "tepstore-out")
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise PermissionError(f"output directory is not writable: {out}")
    return out


def _series(args, case):
    if args.synthetic_days:
        return synthetic_series(case, args.synthetic_days, args.synthetic_seed)
    if not args.load:
        raise ValueError("give --load (plus --wind/--solar) or --synthetic-days")
    for p in (args.load, args.wind, args.solar, args.hydro):
        if p and not Path(p).is_file():
            raise FileNotFoundError(f"series file not found: {p}")
    return read_series(args.load, args.wind, args.solar, args.hydro)


def _scenario_inputs(args):
    case = parse_case(resolve_path(args.case, Path.cwd()))
    series = _series(args, case)
    table = ScalingTable.load_json(args.scaling) if args.scaling else PROJECTIONS
    scaled, load_factor = scale_case(case, table, args.year)
    if args.k > series.n_days:
        raise ValueError(f"k = {args.k} exceeds the {series.n_days} days of series data")
    clustering = cluster_days(series, args.k, args.seed)
    scen = build_scenarios(scaled, series, clustering, load_factor)
    return case, scaled, series, scen


def _plan_config(args) -> PlanConfig:
    cfg = PlanConfig.load_json(args.plan_config) if args.plan_config else PlanConfig()
    cfg = cfg.with_config(args.config)
    if args.storage_cost_mult != 1.0:
        cfg = cfg.with_storage_cost_multiplier(args.storage_cost_mult)
    return cfg


def _solver(args) -> SolverSettings:
    opts = SolveOptions(mip_gap=args.gap,
                        time_limit=args.time_limit if args.time_limit else math.inf)
    kw = {"options": opts, "external": args.external_solver}
    if args.threshold is not None:
        kw["threshold"] = args.threshold
    return SolverSettings(**kw)


def _investments(args, case):
    if not getattr(args, "investments", None):
        return None
    with open(args.investments) as fh:
        data = json.load(fh)
    return InvestmentState.from_dict(data.get("state", data))


def _candidates(args, scaled, scen, cfg, solver, carry) -> CandidateSet:
    if getattr(args, "candidates", None):
        return CandidateSet.load_json(args.candidates)
    if not cfg.builds_storage:
        return CandidateSet()
    report = evaluate(scaled, scen, cfg, carry, solver)
    return select_candidates(report, args.rule)


# ---------------------------------------------------------------------------
# Subcommands


def cmd_parse(args) -> int:
    case = parse_case(resolve_path(args.case, Path.cwd()))
    out = _out_dir(args)
    kinds = {}
    for g in case.generators:
        kinds[g.kind] = kinds.get(g.kind, 0) + 1
    summary = {"name": case.name, "base_mva": case.base_mva, "buses": case.n_bus,
               "branches": case.n_branch, "generators": case.n_gen, "generator_kinds": kinds,
               "load_mw": float(case.arrays.load.sum() * case.base_mva),
               "capacity_mw": float(case.arrays.p_max.sum() * case.base_mva)}
    export.write_json(out / "case_summary.json", summary)
    export.write_geojson(out / "network.geojson", export.network_features(case))
    print(f"{case.name}: {case.n_bus} buses, {case.n_branch} branches, {case.n_gen} generators")
    return EXIT_OK


def cmd_cluster(args) -> int:
    case, scaled, series, scen = _scenario_inputs(args)
    out = _out_dir(args)
    rows = representative_day_table(series, scen)
    export.write_csv(out / "scenarios.csv", list(rows[0]), rows)
    export.write_json(out / "scenarios.json", {"day_ids": scen.day_ids, "weights": scen.weights,
                                               "k": scen.k, "seed": args.seed})
    for r in rows:
        print(f"scenario {r['scenario']}: {r['date']} weight {r['weight']:.4f}")
    return EXIT_OK


def cmd_candidates(args) -> int:
    case, scaled, series, scen = _scenario_inputs(args)
    cfg = _plan_config(args)
    solver = _solver(args)
    out = _out_dir(args)
    carry = _investments(args, case)
    report = evaluate(scaled, scen, cfg, carry, solver)
    cands = select_candidates(report, args.rule)
    export.write_json(out / "candidates.json", cands.to_dict(case))
    export.write_geojson(out / "candidates.geojson",
                         export.candidate_features(case, cands, args.year)
                         + export.recourse_features(case, report, args.year))
    export.write_recourse_csv(out / "recourse.csv", case, report)
    if len(cands) == 0:
        log.warning("no bus sheds load or curtails on every day; storage siting degenerates to none")
    print(f"|SC| = {len(cands)}")
    return EXIT_OK


def _solve_and_decode(model, scaled, scen, cfg, solver):
    try:
        result = solver.solve(model)
    except ExternalSolverError as exc:
        raise SolveFailure(str(exc)) from exc
    if not result.has_solution:
        raise SolveFailure(f"solver returned {result.status} without a solution")
    return decode_solution(model, scaled, scen, cfg, result)


def cmd_plan(args) -> int:
    case, scaled, series, scen = _scenario_inputs(args)
    cfg = _plan_config(args)
    solver = _solver(args)
    out = _out_dir(args)
    carry = _investments(args, case)
    cands = _candidates(args, scaled, scen, cfg, solver, carry)
    model = build_model(scaled, scen, cfg, sorted(cands.buses), carry, name=f"plan_{args.year}")
    sol = _solve_and_decode(model, scaled, scen, cfg, solver)
    export.write_json(out / "solution.json", export.solution_dict(
        scaled, cfg, sol, year=args.year, candidates=cands.to_dict(case),
        binaries=model.count(BINARY)))
    export.write_investments_csv(out / "investments.csv", scaled, cfg, sol)
    export.write_schedule_csv(out / "schedule_bus.csv", out / "schedule_branch.csv", scaled, scen, sol)
    export.write_geojson(out / "plan.geojson", export.plan_features(scaled, cfg, sol, args.year))
    print(f"{sol.solver.status}: objective {sol.solver.objective:.6g}, "
          f"{sol.investments.lines_upgraded} lines upgraded, "
          f"{int(sol.investments.sigma.sum())} storage sites, load shed {sol.load_shed:.6g} MWh")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    case, scaled, series, scen = _scenario_inputs(args)
    cfg = _plan_config(args)
    solver = _solver(args)
    out = _out_dir(args)
    carry = _investments(args, case)
    report = evaluate(scaled, scen, cfg, carry, solver)
    export.write_recourse_csv(out / "recourse.csv", case, report)
    export.write_geojson(out / "recourse.geojson", export.recourse_features(case, report, args.year))
    export.write_json(out / "recourse.json", {
        "statuses": report.statuses, "opex": report.opex, "genex": float(report.genex.sum()),
        "penalty": float(report.penalty_cost.sum()), "load_shed_mwh": report.total_shed_mwh,
        "curtailment_mwh": report.total_curtailed_mwh,
        "congested_branch_ids": [case.branches[e].id for e in sorted(report.congested_branches())]})
    print(f"load shed {report.total_shed_mwh:.6g} MWh/yr, curtailment "
          f"{report.total_curtailed_mwh:.6g} MWh/yr, {len(report.congested_branches())} congested branches")
    return EXIT_OK


def _tag(stage) -> str:
    return f"{stage.config}_x{stage.multiplier:g}_{stage.year}"


def cmd_study(args) -> int:
    manifest = StudyManifest.load(resolve_path(args.manifest, Path.cwd()))
    out = _out_dir(args)
    try:
        result = run_study(manifest.case, manifest.series, manifest.horizon, manifest.plan_config,
                           manifest.solver, manifest.configs)
    except (ExternalSolverError, RecourseError, DecodeError) as exc:
        log.error("study aborted: %s", exc)
        return EXIT_SOLVE
    export.write_study_csv(out / "study.csv", result.rows)
    for st in result.stages:
        scaled, _ = scale_case(manifest.case, manifest.horizon.table, st.year)
        cfg = manifest.plan_config.with_config(st.config).with_storage_cost_multiplier(st.multiplier)
        feats = []
        if st.solution is not None:
            export.write_json(out / f"solution_{_tag(st)}.json",
                              export.solution_dict(scaled, cfg, st.solution, year=st.year,
                                                   multiplier=st.multiplier, row=st.row))
            feats += export.plan_features(scaled, cfg, st.solution, st.year)
        if st.candidates is not None:
            feats += export.candidate_features(scaled, st.candidates, st.year)
        export.write_geojson(out / f"layers_{_tag(st)}.geojson", feats)
    export.write_json(out / "study.json", {"rows": result.rows})
    for row in result.rows:
        shed = "n/a" if row["load_shed_mwh"] is None else f"{row['load_shed_mwh']:,.1f} MWh"
        print(f"{row['config']:>12} x{row['multiplier']:<5g} {row['year']}: {row['status']:<12} "
              f"lines {row['lines']:>3} storage {row['storage_units']:>3} shed {shed}")
    return EXIT_OK


def cmd_export_mps(args) -> int:
    case, scaled, series, scen = _scenario_inputs(args)
    cfg = _plan_config(args)
    solver = _solver(args)
    out = _out_dir(args)
    carry = _investments(args, case)
    cands = _candidates(args, scaled, scen, cfg, solver, carry)
    model = build_model(scaled, scen, cfg, sorted(cands.buses), carry, name=f"tep_{args.year}")
    write_mps(model, out / args.mps_name)
    print(f"wrote {out / args.mps_name}: {model.num_vars} columns "
          f"({model.count(BINARY)} binary), {model.num_cons} rows")
    return EXIT_OK


COMMANDS = {"parse": cmd_parse, "cluster": cmd_cluster, "candidates": cmd_candidates,
            "plan": cmd_plan, "evaluate": cmd_evaluate, "study": cmd_study,
            "export-mps": cmd_export_mps}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (SolveFailure, RecourseError, ExternalSolverError, DecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVE
    except (FileNotFoundError, PermissionError, CaseParseError, CaseStructureError, SeriesError,
            ManifestError, BuildError, json.JSONDecodeError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
