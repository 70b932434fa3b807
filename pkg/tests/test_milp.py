from __future__ import annotations

import itertools
import math
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from casebuilder import lp_objective
from tepstore.milp import (BINARY, CONTINUOUS, EQ, GE, INTEGER, LE, ModelBuilder, ModelError,
                           SolveOptions, SolverSettings, check_solution, relative_gap, solve)
from tepstore.milp.external import ExternalSolverError, parse_solution, solve_external
from tepstore.milp.mps import MpsError, format_mps, parse_mps, read_mps, write_mps
from tepstore.milp.simplex import solve_lp


def random_model(seed, n=6, m=5, int_frac=0.0, free_frac=0.1):
    """A bounded random LP/MILP that is feasible at a known point."""
    rng = np.random.default_rng(seed)
    mb = ModelBuilder(f"rand{seed}")
    types = [INTEGER if rng.random() < int_frac else CONTINUOUS for _ in range(n)]
    lower = np.where(rng.random(n) < free_frac, -5.0, 0.0)
    upper = rng.integers(1, 6, size=n).astype(float)
    x0 = np.array([rng.integers(int(lo), int(hi) + 1) for lo, hi in zip(lower, upper)], float)
    cols = [mb.add_var(f"x{j}", lower[j], upper[j], types[j], float(rng.normal())) for j in range(n)]
    for i in range(m):
        a = np.round(rng.normal(size=n), 3)
        a[rng.random(n) < 0.3] = 0.0
        sense = [LE, GE, EQ][int(rng.integers(0, 3))] if i else LE
        lhs = float(a @ x0)
        rhs = lhs if sense == EQ else lhs + (1.0 if sense == LE else -1.0) * float(rng.uniform(0, 2))
        mb.add_con(f"r{i}", cols, a, sense, rhs)
    mb.constant = float(rng.normal())
    return mb.build()


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000))
def test_simplex_matches_scipy(seed):
    model = random_model(seed)
    ours = solve_lp(model)
    ref = lp_objective(model)
    assert ours.status == "optimal" and ref is not None
    assert ours.objective == pytest.approx(ref, rel=1e-7, abs=1e-7)
    assert check_solution(model.relaxed(), ours.x) == []


def test_simplex_infeasible_and_unbounded():
    mb = ModelBuilder()
    x = mb.add_var("x", 0, 1)
    mb.add_con("c", [x], [1.0], GE, 2.0)
    assert solve_lp(mb.build()).status == "infeasible"
    mb = ModelBuilder()
    x = mb.add_var("x", -math.inf, math.inf, cost=-1.0)
    y = mb.add_var("y", 0, 1)
    mb.add_con("c", [x, y], [1.0, -1.0], GE, 0.0)
    assert solve_lp(mb.build()).status == "unbounded"


def enumerate_milp(model):
    """Best objective by enumerating every integer assignment (scipy LPs)."""
    ints = [j for j, t in enumerate(model.var_types) if t != CONTINUOUS]
    ranges = [range(int(model.lower[j]), int(model.upper[j]) + 1) for j in ints]
    best = math.inf
    for values in itertools.product(*ranges):
        lo, hi = model.lower.copy(), model.upper.copy()
        lo[ints] = hi[ints] = values
        v = lp_objective(model.with_bounds(lo, hi))
        if v is not None:
            best = min(best, v)
    return best


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_branch_and_bound_matches_enumeration(seed):
    model = random_model(seed, n=5, m=4, int_frac=0.6, free_frac=0.0)
    result = solve(model, SolveOptions(mip_gap=0.0))
    best = enumerate_milp(model)
    assert result.status == "optimal"
    assert result.objective == pytest.approx(best, rel=1e-7, abs=1e-7)
    assert check_solution(model, result.primal) == []
    assert result.bound <= result.objective + 1e-7


def test_gap_limit_reports_consistent_bound():
    model = random_model(3, n=8, m=6, int_frac=1.0, free_frac=0.0)
    result = solve(model, SolveOptions(mip_gap=0.5))
    assert result.has_solution
    assert result.gap <= 0.5 + 1e-12
    assert result.gap == pytest.approx(relative_gap(result.objective, result.bound))


def test_relative_gap_edge_cases():
    assert relative_gap(10.0, 10.0) == 0.0
    assert relative_gap(10.0, 9.0) == pytest.approx(0.1)
    assert relative_gap(math.inf, 0.0) == math.inf


def test_builder_rejects_bad_input():
    mb = ModelBuilder()
    mb.add_var("x")
    mb.add_var("x")
    with pytest.raises(ModelError, match="not unique"):
        mb.build()
    mb = ModelBuilder()
    mb.add_var("b", 0, 2, BINARY)
    with pytest.raises(ModelError, match="outside"):
        mb.build()


def test_check_solution_reports_violations():
    mb = ModelBuilder()
    x = mb.add_var("x", 0, 3, INTEGER)
    mb.add_con("c", [x], [1.0], LE, 2.0)
    model = mb.build()
    assert check_solution(model, np.array([2.0])) == []
    assert check_solution(model, np.array([2.5]))
    assert check_solution(model, np.array([3.0]))


# -- MPS ---------------------------------------------------------------------


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_mps_round_trip_is_exact(seed):
    model = random_model(seed, int_frac=0.4)
    back = parse_mps(format_mps(model))
    assert back.same_as(model)
    assert np.array_equal(back.lower, model.lower) and np.array_equal(back.upper, model.upper)
    assert back.constant == model.constant


def test_mps_tightened_binaries_survive(tmp_path):
    mb = ModelBuilder("b")
    mb.add_var("fixed_on", 1, 1, BINARY, 1.0)
    mb.add_var("free", 0, 1, BINARY, 1.0)
    mb.add_var("fixed_off", 0, 0, BINARY, 1.0)
    model = mb.build()
    write_mps(model, tmp_path / "b.mps")
    back = read_mps(tmp_path / "b.mps")
    assert back.var_types == (BINARY,) * 3
    assert back.lower.tolist() == [1, 0, 0] and back.upper.tolist() == [1, 1, 0]


def test_mps_reports_line_numbers():
    text = "NAME x\nROWS\n N obj\nCOLUMNS\n y obj 1 c 2\nENDATA\n"
    with pytest.raises(MpsError, match="line 5"):
        parse_mps(text)


# -- external solver ---------------------------------------------------------


def test_parse_solution_contract():
    model = random_model(1)
    text = "optimal\n1.5\n" + "".join(f"{n} 0.25\n" for n in model.var_names)
    res = parse_solution(text, model)
    assert res.status == "optimal" and res.objective == 1.5 and res.gap == 0.0
    assert np.allclose(res.primal, 0.25)
    with pytest.raises(ExternalSolverError):
        parse_solution("optimal\n1.5\nx0 1\n", model)
    with pytest.raises(ExternalSolverError):
        parse_solution("", model)


def test_highs_runner_agrees_with_internal():
    model = random_model(11, n=6, m=5, int_frac=0.5, free_frac=0.0)
    cmd = f"{sys.executable} -m tepstore.milp.highs_runner --mip-gap 0"
    ext = solve_external(model, cmd)
    internal = solve(model, SolveOptions(mip_gap=0.0))
    assert ext.objective == pytest.approx(internal.objective, rel=1e-7, abs=1e-7)


def test_external_failure_raises():
    with pytest.raises(ExternalSolverError, match="status 1"):
        solve_external(random_model(1), "false")
    with pytest.raises(ExternalSolverError, match="cannot run"):
        solve_external(random_model(1), "/nonexistent/solver")


def test_dispatch_routes_by_size(monkeypatch):
    model = random_model(2)
    calls = []
    import tepstore.milp.dispatch as dispatch

    def fake_external(m, cmd, timeout=None):
        calls.append(cmd)
        return solve(m)

    monkeypatch.setattr(dispatch, "solve_external", fake_external)
    SolverSettings(external="my-solver", threshold=model.num_vars).solve(model)
    assert calls == []
    SolverSettings(external="my-solver", threshold=model.num_vars - 1).solve(model)
    assert calls == ["my-solver"]
