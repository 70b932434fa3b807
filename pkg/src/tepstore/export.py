"""Report writers: JSON, CSV and GeoJSON.

Per-unit values are converted to MW/MWh here and nowhere else. Writers
are deterministic: keys are sorted, floats are printed with a fixed
format and no timing information is included, so identical inputs give
byte-identical files.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .candidates import CandidateSet
from .grid import GridCase
from .recourse import RecourseReport
from .scenarios import ScenarioSet
from .tep import PlanConfig, PlanSolution, line_step_cost, upgrade_step


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def write_json(path, obj) -> None:
    text = json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False)
    Path(path).write_text(text + "\n")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "" if not math.isfinite(v) else "%.10g" % v
    return str(v)


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            if isinstance(row, dict):
                row = [row.get(h) for h in header]
            w.writerow([_fmt(v) for v in row])


# ---------------------------------------------------------------------------
# Plans


def line_investments(case: GridCase, config: PlanConfig, gamma) -> list[dict]:
    step_mw = upgrade_step(case, config) * case.base_mva
    cost = line_step_cost(case, config)
    out = []
    for e in np.flatnonzero(np.asarray(gamma) > 0):
        br = case.branches[e]
        out.append({
            "branch": int(e), "branch_id": br.id,
            "from_bus_id": case.buses[br.from_bus].id, "to_bus_id": case.buses[br.to_bus].id,
            "level": int(gamma[e]), "added_mw": float(gamma[e] * step_mw[e]),
            "length_km": br.length, "cost": float(gamma[e] * cost[e]),
        })
    return out


def storage_investments(case: GridCase, sigma, power, energy) -> list[dict]:
    out = []
    for i in np.flatnonzero(np.asarray(sigma) > 0):
        out.append({"bus": int(i), "bus_id": case.buses[i].id, "name": case.buses[i].name,
                    "power_mw": float(power[i]), "energy_mwh": float(energy[i])})
    return out


def solution_dict(case: GridCase, config: PlanConfig, sol: PlanSolution, **extra) -> dict:
    inv, new = sol.investments, sol.new_investments
    res = sol.solver
    d = {
        "status": res.status, "objective": res.objective, "bound": res.bound, "gap": res.gap,
        "nodes": res.nodes,
        "costs": {"capex_lines": sol.capex_lines, "capex_storage": sol.capex_storage,
                  "genex": sol.genex, "penalty": sol.penalty_cost, "total": sol.total_cost},
        "load_shed_mwh": sol.load_shed, "curtailment_mwh": sol.curtailment,
        "storage_sites_considered": [case.buses[i].id for i in sol.storage_buses],
        "cumulative": {"lines": line_investments(case, config, inv.gamma),
                       "storage": storage_investments(case, inv.sigma, inv.power, inv.energy)},
        "state": inv.to_dict(),
        "config": config.to_dict(),
    }
    if new is not None:
        d["new"] = {"lines": line_investments(case, config, new.gamma),
                    "storage": storage_investments(case, new.sigma, new.power, new.energy)}
    d.update(extra)
    return d


def write_investments_csv(path, case: GridCase, config: PlanConfig, sol: PlanSolution) -> None:
    rows = []
    for ln in line_investments(case, config, sol.investments.gamma):
        rows.append(["line", ln["branch_id"], ln["from_bus_id"], ln["to_bus_id"], ln["level"],
                     ln["added_mw"], None, ln["cost"]])
    for st in storage_investments(case, sol.investments.sigma, sol.investments.power,
                                  sol.investments.energy):
        rows.append(["storage", None, st["bus_id"], None, None, st["power_mw"], st["energy_mwh"], None])
    write_csv(path, ["kind", "branch_id", "bus_id", "to_bus_id", "level", "mw", "mwh", "cost"], rows)


def write_schedule_csv(bus_path, branch_path, case: GridCase, scenarios: ScenarioSet,
                       sol: PlanSolution) -> None:
    """Node-hour and branch-hour tables in MW / MWh."""
    base = case.base_mva
    sch = sol.schedule
    arr = case.arrays
    k, T = scenarios.k, scenarios.T
    gen_at_bus = np.zeros((k, T, case.n_bus))
    np.add.at(gen_at_bus, (slice(None), slice(None), arr.gen_bus), sch.pg)
    rows = []
    for s in range(k):
        for t in range(T):
            for i, bus in enumerate(case.buses):
                rows.append([s + 1, t + 1, bus.id, base * scenarios.demand[s, t, i],
                             base * gen_at_bus[s, t, i], base * sch.shed[s, t, i],
                             base * sch.over[s, t, i], base * sch.ch[s, t, i],
                             base * sch.dis[s, t, i], base * sch.soc[s, t, i]])
    write_csv(bus_path, ["scenario", "hour", "bus_id", "demand_mw", "generation_mw", "shed_mw",
                         "overserved_mw", "charge_mw", "discharge_mw", "soc_mwh"], rows)
    rows = []
    for s in range(k):
        for t in range(T):
            for e, br in enumerate(case.branches):
                rows.append([s + 1, t + 1, br.id, base * sch.pf[s, t, e]])
    write_csv(branch_path, ["scenario", "hour", "branch_id", "flow_mw"], rows)


def write_recourse_csv(path, case: GridCase, report: RecourseReport) -> None:
    base = case.base_mva
    rows = []
    for s in range(report.k):
        for t in range(report.shed.shape[1]):
            for i, bus in enumerate(case.buses):
                rows.append([s + 1, t + 1, bus.id, base * report.shed[s, t, i],
                             base * report.curtailed[s, t, i]])
    write_csv(path, ["scenario", "hour", "bus_id", "shed_mwh", "curtailed_mwh"], rows)


def write_study_csv(path, rows) -> None:
    from .planner import ROW_FIELDS
    write_csv(path, list(ROW_FIELDS), rows)


# ---------------------------------------------------------------------------
# GeoJSON


def _point(case: GridCase, i: int):
    b = case.buses[i]
    if not b.has_coords:
        return None
    return {"type": "Point", "coordinates": [b.longitude, b.latitude]}


def _line(case: GridCase, e: int):
    br = case.branches[e]
    a, b = case.buses[br.from_bus], case.buses[br.to_bus]
    if not (a.has_coords and b.has_coords):
        return None
    return {"type": "LineString", "coordinates": [[a.longitude, a.latitude], [b.longitude, b.latitude]]}


def _feature(geometry, **props) -> dict:
    return {"type": "Feature", "geometry": geometry, "properties": props}


def feature_collection(features) -> dict:
    return {"type": "FeatureCollection", "features": list(features)}


def plan_features(case: GridCase, config: PlanConfig, sol: PlanSolution, stage) -> list[dict]:
    """Upgraded lines (with level) and storage sites (with MWh)."""
    feats = []
    for ln in line_investments(case, config, sol.investments.gamma):
        feats.append(_feature(_line(case, ln["branch"]), stage=stage, kind="line_upgrade",
                              level=ln["level"], branch_id=ln["branch_id"], added_mw=ln["added_mw"]))
    inv = sol.investments
    for st in storage_investments(case, inv.sigma, inv.power, inv.energy):
        feats.append(_feature(_point(case, st["bus"]), stage=stage, kind="storage",
                              mwh=st["energy_mwh"], mw=st["power_mw"], bus_id=st["bus_id"]))
    return feats


def candidate_features(case: GridCase, cands: CandidateSet, stage) -> list[dict]:
    return [_feature(_point(case, b), stage=stage, kind="candidate", bus_id=case.buses[b].id,
                     provenance=sorted(tags))
            for b, tags in cands.provenance.items()]


def recourse_features(case: GridCase, report: RecourseReport, stage) -> list[dict]:
    """Shed nodes, curtailed nodes and congested branches."""
    feats = []
    shed = report.node_shed_mwh()
    curt = report.node_curtailed_mwh()
    for i in np.flatnonzero(shed > 0):
        feats.append(_feature(_point(case, i), stage=stage, kind="shed", mwh=float(shed[i]),
                              bus_id=case.buses[i].id))
    for i in np.flatnonzero(curt > 0):
        feats.append(_feature(_point(case, i), stage=stage, kind="curtailed", mwh=float(curt[i]),
                              bus_id=case.buses[i].id))
    hours = report.congested.sum(axis=(0, 1))
    for e in sorted(report.congested_branches()):
        feats.append(_feature(_line(case, e), stage=stage, kind="congested",
                              level=int(hours[e]), branch_id=case.branches[e].id))
    return feats


def network_features(case: GridCase) -> list[dict]:
    feats = [_feature(_point(case, i), kind="bus", bus_id=b.id, name=b.name, load_mw=b.load * case.base_mva)
             for i, b in enumerate(case.buses)]
    feats += [_feature(_line(case, e), kind="branch", branch_id=br.id,
                       rating_mw=br.thermal_limit * case.base_mva, length_km=br.length)
              for e, br in enumerate(case.branches)]
    return feats


def write_geojson(path, features) -> None:
    write_json(path, feature_collection(features))
