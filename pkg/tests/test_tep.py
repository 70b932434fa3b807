from __future__ import annotations

import dataclasses
import logging

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from casebuilder import make_case, manual_scenarios, random_instance, three_bus_case
from tepstore.milp import BINARY, INTEGER, SolveOptions, solve
from tepstore.milp.simplex import solve_lp
from tepstore.tep import (STORAGE_ONLY, TEP_ONLY, BuildError, DecodeError, InvestmentState,
                          PlanConfig, build_model, capex_of, decode_solution, line_step_cost,
                          upgrade_step)

EXACT = SolveOptions(mip_gap=1e-9)
# The invariants hold for any incumbent. A node cap keeps random instances
# with weak relaxations from stalling the property test.
CAPPED = SolveOptions(mip_gap=1e-9, node_limit=300)


def plan(case, scen, cfg, cands=(), carry=None, options=EXACT):
    model = build_model(case, scen, cfg, cands, carry)
    result = solve(model, options)
    assert result.has_solution
    return model, result, decode_solution(model, case, scen, cfg, result)


def balance_residual(case, scen, s):
    arr = case.arrays
    k, T = scen.k, scen.T
    inj = np.zeros((k, T, case.n_bus))
    np.add.at(inj, (slice(None), slice(None), arr.gen_bus), s.pg)
    np.add.at(inj, (slice(None), slice(None), arr.t), s.pf)
    np.add.at(inj, (slice(None), slice(None), arr.f), -s.pf)
    return inj + s.dis + s.xi - scen.demand - s.ch


@settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.integers(0, 100_000))
def test_operating_invariants(seed):
    case, scen, cands, cfg = random_instance(seed)
    model, result, sol = plan(case, scen, cfg, cands, options=CAPPED)
    s, inv, arr = sol.schedule, sol.investments, case.arrays
    # Flow follows the angle difference.
    dtheta = s.theta[:, :, arr.t] - s.theta[:, :, arr.f]
    assert np.abs(s.pf - dtheta / arr.x).max() <= 1e-6
    # Thermal limit including upgrades.
    limit = arr.rating + inv.gamma * upgrade_step(case, cfg)
    assert (np.abs(s.pf) <= limit + 1e-6).all()
    # Nodal balance with xi = shed - over.
    assert np.abs(balance_residual(case, scen, s)).max() <= 1e-6
    # Generator limits.
    assert (s.pg >= scen.p_min - 1e-6).all() and (s.pg <= scen.p_max + 1e-6).all()
    # Storage sizing and operation.
    assert (inv.energy <= cfg.duration_cap * inv.power + 1e-6).all()
    assert set(np.flatnonzero(inv.sigma)) <= set(cands)
    eta, pr = cfg.efficiency, inv.power / case.base_mva
    assert (eta * s.ch <= pr + 1e-6).all() and (s.dis / eta <= pr + 1e-6).all()
    assert (s.soc <= inv.energy / case.base_mva + 1e-6).all()
    assert np.minimum(s.ch, s.dis).max() <= 1e-6
    # Reference bus.
    assert np.abs(s.theta[:, :, 0]).max() == 0.0
    assert sol.total_cost == pytest.approx(result.objective, rel=1e-6)


def test_relaxation_allows_simultaneous_charge_and_discharge():
    """Negative control: the exclusivity rows need integral alpha."""
    found = False
    for seed in range(60):
        case, scen, cands, cfg = random_instance(seed)
        cfg = dataclasses.replace(cfg, storage_fixed=0.0, storage_power=0.0, storage_energy=0.0,
                                  efficiency=0.8, penalty=1e5)
        model = build_model(case, scen, cfg, cands)
        lp = solve_lp(model)
        ch = np.array([lp.x[j] for j, n in enumerate(model.var_names) if n.startswith("ch_")])
        dis = np.array([lp.x[j] for j, n in enumerate(model.var_names) if n.startswith("dis_")])
        if len(ch) and np.minimum(ch, dis).max() > 1e-4:
            found = True
            break
    assert found


def test_single_bus_dispatches_load():
    case = make_case([80], [(1, "coal", 100, 0, 20)], [])
    scen = manual_scenarios(case, [[[80.0]]])
    _, _, sol = plan(case, scen, PlanConfig(config=TEP_ONLY))
    assert sol.schedule.pg[0, 0, 0] == pytest.approx(0.8)
    assert sol.schedule.xi.max() == 0.0 and sol.penalty_cost == 0.0


def test_zero_load_costs_nothing():
    case = three_bus_case()
    scen = manual_scenarios(case, np.zeros((1, 3, 3)))
    _, _, sol = plan(case, scen, PlanConfig(), [2])
    assert sol.total_cost == 0.0
    for name in ("pg", "pf", "shed", "over", "ch", "dis"):
        assert np.abs(getattr(sol.schedule, name)).max() <= 1e-12


def two_bus(load_mw, rate_mw, penalty, line_cost):
    case = make_case([0, load_mw], [(1, "coal", 500, 0, 0)], [(1, 2, 0.1, rate_mw)])
    scen = manual_scenarios(case, [[[0.0, load_mw]]])
    cfg = PlanConfig(config=TEP_ONLY, upgrade_levels=1, penalty=penalty, line_cost=line_cost,
                     days_per_year=1)
    return case, scen, cfg


@pytest.mark.parametrize("penalty, expect", [(100.0, 1), (1.0, 0)])
def test_upgrade_choice_matches_closed_form(penalty, expect):
    # 120 MW of load behind a 100 MW line; one level adds 30 MW for
    # line_cost * 30 MW * 1 km. Shed costs penalty * 20 MWh otherwise.
    case, scen, cfg = two_bus(120, 100, penalty, line_cost=50.0)
    upgrade_cost = 50.0 * 30.0 * 1.0
    shed_cost = penalty * 20.0
    assert (shed_cost > upgrade_cost) == bool(expect)
    _, result, sol = plan(case, scen, cfg)
    assert sol.investments.gamma[0] == expect
    assert result.objective == pytest.approx(min(upgrade_cost, shed_cost), rel=1e-9)


def test_soc_gain_from_charging():
    """Charging 10 MWh at 95% efficiency raises the state of charge by 9.5 MWh."""
    case = make_case([0, 0], [(1, "coal", 100, 0, 0)], [(1, 2, 0.1, 100)])
    scen = manual_scenarios(case, [[[0, 0], [0, 40]]])
    carry = InvestmentState([0], [0, 1], [0, 10.0], [0, 40.0])
    cfg = PlanConfig(config=STORAGE_ONLY, penalty=1e3)
    model = build_model(case, scen, cfg, [], carry)
    lo, hi = model.lower.copy(), model.upper.copy()
    j = model.index("ch_1_0_0")
    lo[j] = hi[j] = 0.1
    result = solve(model.with_bounds(lo, hi), EXACT)
    sol = decode_solution(model, case, scen, cfg, result)
    s = sol.schedule
    assert (s.soc[0, 0, 1] - 0.2) * 100 == pytest.approx(9.5, abs=1e-9)


def test_line_cost_formula():
    case = make_case([0, 10], [(1, "coal", 100, 0, 0)], [(1, 2, 0.1, 200)],
                     coords=[(30.0, -97.0), (31.0, -97.0)])
    cfg = PlanConfig()
    length = case.branches[0].length
    assert line_step_cost(case, cfg)[0] == pytest.approx(1243 * 60.0 * length, rel=1e-12)
    assert upgrade_step(case, cfg)[0] == pytest.approx(0.6)


def test_model_structure_per_config():
    case, scen, cands, cfg = random_instance(5)
    full = build_model(case, scen, cfg.with_config("tep_storage"), cands)
    lines = build_model(case, scen, cfg.with_config(TEP_ONLY), cands)
    storage = build_model(case, scen, cfg.with_config(STORAGE_ONLY), cands)
    n_lines = sum(n.startswith("gamma_") for n in full.var_names)
    assert full.count(INTEGER) == n_lines == lines.count(INTEGER)
    assert storage.count(INTEGER) == 0
    assert lines.count(BINARY) == 0
    assert storage.count(BINARY) == full.count(BINARY) == len(cands) * (1 + scen.k * scen.T)


def test_tep_only_ignores_candidates_with_warning(caplog):
    case, scen, cands, cfg = random_instance(2)
    with caplog.at_level(logging.WARNING, logger="tepstore"):
        model = build_model(case, scen, cfg.with_config(TEP_ONLY), cands)
    assert "ignores" in caplog.text
    assert not any(n.startswith("sigma_") for n in model.var_names)


def test_bad_candidates_and_unbuilt_scenarios():
    case, scen, _, cfg = random_instance(1)
    with pytest.raises(BuildError):
        build_model(case, scen, cfg, [case.n_bus])
    from tepstore.scenarios import ScenarioSet
    with pytest.raises(BuildError):
        build_model(case, ScenarioSet((0,), np.array([1.0])), cfg)


def test_carry_forward_lower_bounds_and_net_capex():
    case, scen, cands, cfg = random_instance(11)
    cfg = dataclasses.replace(cfg, upgrade_levels=2)
    _, _, first = plan(case, scen, cfg, cands)
    heavier = manual_scenarios(case, scen.demand * 100 * 1.3, scen.p_max / np.where(
        case.arrays.p_max > 0, case.arrays.p_max, 1.0), scen.weights)
    model, result, second = plan(case, heavier, cfg, cands, first.investments)
    a, b = first.investments, second.investments
    assert (b.gamma >= a.gamma).all() and (b.sigma >= a.sigma).all()
    assert (b.power >= a.power - 1e-6).all() and (b.energy >= a.energy - 1e-6).all()
    lines, storage = capex_of(case, cfg, b, a)
    assert second.capex_lines == pytest.approx(lines, rel=1e-6, abs=1e-3)
    assert second.capex_storage == pytest.approx(storage, rel=1e-6, abs=1e-3)
    new = second.new_investments
    assert (new.gamma == b.gamma - a.gamma).all()


def test_tightened_beta_is_equivalent():
    case, scen, cands, cfg = random_instance(17)
    _, r1, _ = plan(case, scen, cfg, cands)
    _, r2, _ = plan(case, scen, dataclasses.replace(cfg, tighten_beta=True), cands)
    assert r2.objective == pytest.approx(r1.objective, rel=1e-7, abs=1e-6)


def test_decode_detects_drift():
    case, scen, cands, cfg = random_instance(3)
    model = build_model(case, scen, cfg, cands)
    result = solve(model, EXACT)
    tampered = dataclasses.replace(result, objective=result.objective * 1.01 + 10.0)
    with pytest.raises(DecodeError):
        decode_solution(model, case, scen, cfg, tampered)


def test_investment_state_validation():
    with pytest.raises(ValueError, match="sigma = 1"):
        InvestmentState([0], [0, 0], [0, 1], [0, 1])
    with pytest.raises(ValueError):
        InvestmentState([0], [0, 2], [0, 0], [0, 0])
    st_ = InvestmentState([1], [0, 1], [0, 5.0], [0, 20.0])
    assert InvestmentState.from_dict(st_.to_dict()).to_dict() == st_.to_dict()
    case = make_case([0, 0], [(1, "coal", 10, 0, 0)], [(1, 2, 0.1, 10)])
    with pytest.raises(BuildError):
        InvestmentState([0], [0, 1], [0, 1.0], [0, 10.0]).check(case, PlanConfig())


def test_plan_config_round_trip():
    cfg = PlanConfig(penalty=1e4, config=STORAGE_ONLY)
    assert PlanConfig.from_dict(cfg.to_dict()) == cfg
    doubled = cfg.with_storage_cost_multiplier(2.0)
    assert doubled.storage_fixed == 2 * cfg.storage_fixed
    assert doubled.storage_power == 2 * cfg.storage_power
    assert doubled.storage_energy == 2 * cfg.storage_energy
    assert doubled.line_cost == cfg.line_cost
    with pytest.raises(ValueError):
        PlanConfig(config="nonsense")
    with pytest.raises(ValueError):
        PlanConfig(efficiency=1.5)
