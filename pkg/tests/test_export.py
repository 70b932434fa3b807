from __future__ import annotations

import csv
import json
import math

import numpy as np
import pytest

from tepstore.candidates import SHED, CandidateSet
from tepstore.export import (_clean, candidate_features, feature_collection, network_features,
                             plan_features, recourse_features, solution_dict, write_csv,
                             write_geojson, write_investments_csv, write_json,
                             write_recourse_csv, write_schedule_csv)
from tepstore.grid import parse_case
from tepstore.manifest import bundled_path
from tepstore.milp import SolveOptions, solve
from tepstore.recourse import evaluate, fixed_model
from tepstore.scenarios import build_scenarios, cluster_days, synthetic_series
from tepstore.tep import InvestmentState, PlanConfig, decode_solution


@pytest.fixture(scope="module")
def pinned():
    """case6 operated with two line levels on branch 0 and storage at bus index 3."""
    case = parse_case(bundled_path("case6_tep.m"))
    series = synthetic_series(case, 4, seed=0)
    scen = build_scenarios(case, series, cluster_days(series, 2))
    cfg = PlanConfig()
    sigma = np.zeros(case.n_bus, int)
    sigma[3] = 1
    inv = InvestmentState(np.eye(1, case.n_branch, 0, dtype=int)[0] * 2, sigma,
                          sigma * 50.0, sigma * 200.0)
    model = fixed_model(case, scen, cfg, inv)
    sol = decode_solution(model, case, scen, cfg, solve(model, SolveOptions(mip_gap=1e-6)))
    return case, scen, cfg, sol


def test_clean_makes_json_safe():
    out = _clean({"a": np.float64(math.nan), "b": [np.int64(3), np.inf], 4: np.arange(2),
                  "c": np.bool_(True)})
    assert out == {"a": None, "b": [3, None], "4": [0, 1], "c": True}
    assert json.dumps(out, allow_nan=False)


def test_csv_format(tmp_path):
    path = tmp_path / "t.csv"
    write_csv(path, ["a", "b", "c"], [[1, 0.1 + 0.2, None], {"a": True, "c": math.inf}])
    assert path.read_text() == "a,b,c\n1,0.3,\n1,,\n"


def test_solution_json_reports_investments(pinned, tmp_path):
    case, _, cfg, sol = pinned
    d = solution_dict(case, cfg, sol, year=2030)
    (line,) = d["cumulative"]["lines"]
    assert line["level"] == 2
    assert line["added_mw"] == pytest.approx(2 * 0.3 * case.branches[0].thermal_limit * 100)
    (site,) = d["cumulative"]["storage"]
    assert site["bus"] == 3 and site["power_mw"] == 50.0 and site["energy_mwh"] == 200.0
    assert d["new"] == {"lines": [], "storage": []}
    assert d["costs"]["total"] == pytest.approx(sol.total_cost)
    write_json(tmp_path / "s.json", d)
    assert json.loads((tmp_path / "s.json").read_text())["year"] == 2030


def test_geojson_layers(pinned, tmp_path):
    case, scen, cfg, sol = pinned
    feats = plan_features(case, cfg, sol, stage=2030)
    kinds = {f["properties"]["kind"]: f for f in feats}
    assert kinds["line_upgrade"]["properties"]["level"] == 2
    assert kinds["line_upgrade"]["geometry"]["type"] == "LineString"
    assert kinds["storage"]["properties"]["mwh"] == 200.0
    bus = case.buses[3]
    assert kinds["storage"]["geometry"]["coordinates"] == [bus.longitude, bus.latitude]
    assert all(f["properties"]["stage"] == 2030 for f in feats)
    cands = candidate_features(case, CandidateSet({3: {SHED}}), 2030)
    assert cands[0]["properties"]["provenance"] == ["shed"]
    assert len(network_features(case)) == case.n_bus + case.n_branch
    report = evaluate(case, scen, cfg, sol.investments)
    for f in recourse_features(case, report, 2030):
        assert f["properties"]["kind"] in {"shed", "curtailed", "congested"}
    write_geojson(tmp_path / "l.geojson", feats)
    again = json.loads((tmp_path / "l.geojson").read_text())
    assert again == json.loads(json.dumps(_clean(feature_collection(feats))))


def test_tables_are_in_mw(pinned, tmp_path):
    case, scen, cfg, sol = pinned
    write_schedule_csv(tmp_path / "b.csv", tmp_path / "e.csv", case, scen, sol)
    rows = list(csv.DictReader(open(tmp_path / "b.csv")))
    assert len(rows) == scen.k * scen.T * case.n_bus
    first = rows[0]
    assert float(first["demand_mw"]) == pytest.approx(scen.demand[0, 0, 0] * 100, rel=1e-9)
    flows = list(csv.DictReader(open(tmp_path / "e.csv")))
    assert float(flows[0]["flow_mw"]) == pytest.approx(sol.schedule.pf[0, 0, 0] * 100, rel=1e-9,
                                                        abs=1e-8)
    write_investments_csv(tmp_path / "i.csv", case, cfg, sol)
    inv_rows = list(csv.DictReader(open(tmp_path / "i.csv")))
    assert [r["kind"] for r in inv_rows] == ["line", "storage"]
    write_recourse_csv(tmp_path / "r.csv", case, evaluate(case, scen, cfg, sol.investments))
    assert sum(1 for _ in open(tmp_path / "r.csv")) == 1 + scen.k * scen.T * case.n_bus


def test_writers_are_deterministic(pinned, tmp_path):
    case, scen, cfg, sol = pinned
    for name in ("a", "b"):
        write_json(tmp_path / f"{name}.json", solution_dict(case, cfg, sol))
        write_schedule_csv(tmp_path / f"{name}_b.csv", tmp_path / f"{name}_e.csv", case, scen, sol)
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    assert (tmp_path / "a_b.csv").read_bytes() == (tmp_path / "b_b.csv").read_bytes()
