from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tepstore.candidates import (CURTAILED, INTERSECTION, MANUAL, SHED, UNION, CandidateSet,
                                 augment_candidates, daily_flags, select_candidates)
from tepstore.recourse import EPS_CURT, RecourseReport


def report(shed_days, curt_days=None, n_bus=5, T=3):
    """A report from per-day ``{bus: pu*h}`` dicts spread evenly over the hours."""
    k = len(shed_days)
    shed = np.zeros((k, T, n_bus))
    curt = np.zeros((k, T, n_bus))
    for s, day in enumerate(shed_days):
        for b, v in day.items():
            shed[s, :, b] = v / T
    for s, day in enumerate(curt_days or [{}] * k):
        for b, v in day.items():
            curt[s, :, b] = v / T
    zeros_k = np.zeros(k)
    return RecourseReport(tuple(range(k)), np.full(k, 1 / k), shed, np.zeros_like(shed), curt,
                          np.zeros((k, T, 1)), np.ones(1), np.zeros((k, T, 1), bool), zeros_k,
                          zeros_k, ("optimal",) * k)


def test_node_shed_every_day_is_kept_by_both_rules():
    rep = report([{2: 1.0}, {2: 0.3}, {2: 0.01}])
    for rule in (INTERSECTION, UNION):
        sc = select_candidates(rep, rule)
        assert sc.buses == {2} and sc.provenance[2] == {SHED}


def test_node_shed_on_one_day_needs_the_union_rule():
    rep = report([{1: 1.0, 3: 0.2}, {1: 1.0}, {1: 1.0}, {1: 1.0}, {1: 1.0}])
    assert select_candidates(rep, INTERSECTION).buses == {1}
    assert select_candidates(rep, UNION).buses == {1, 3}


def test_quiet_system_gives_empty_set():
    rep = report([{}, {}])
    assert len(select_candidates(rep)) == 0
    assert len(select_candidates(rep, UNION)) == 0


def test_curtailment_threshold():
    below = EPS_CURT * 0.9
    above = EPS_CURT * 1.1
    rep = report([{}, {}], [{0: above, 4: below}, {0: above, 4: above}])
    sc = select_candidates(rep, INTERSECTION)
    assert sc.buses == {0} and sc.provenance[0] == {CURTAILED}
    assert select_candidates(rep, INTERSECTION, eps_curt=below / 2).buses == {0, 4}


def test_mixed_reasons_are_merged():
    rep = report([{3: 0.5}, {}], [{}, {3: 1.0}])
    sc = select_candidates(rep, INTERSECTION)
    assert sc.provenance == {3: {SHED, CURTAILED}}
    assert daily_flags(rep) == [{3: {SHED}}, {3: {CURTAILED}}]


@given(st.lists(st.dictionaries(st.integers(0, 5), st.sampled_from([0.0, 1e-12, 0.5, 2.0]),
                                max_size=4), min_size=1, max_size=5))
def test_rules_match_set_algebra(days):
    rep = report(days, n_bus=6)
    flagged = [{b for b, v in d.items() if v > 1e-9} for d in days]
    inter = set.intersection(*flagged)
    union = set.union(*flagged)
    assert select_candidates(rep, INTERSECTION).buses == inter
    assert select_candidates(rep, UNION).buses == union
    assert inter <= union


def test_augment_adds_post_investment_shed():
    base = select_candidates(report([{1: 1.0}, {1: 1.0}]))
    post = report([{}, {4: 0.2}])
    grown = augment_candidates(base, post)
    assert grown.buses == {1, 4}
    assert grown.provenance[4] == {SHED}
    assert grown.provenance[1] == base.provenance[1]
    assert augment_candidates(base, report([{}, {}])).buses == base.buses


def test_unknown_rule_is_rejected():
    with pytest.raises(ValueError):
        select_candidates(report([{}]), "majority")


def test_candidate_set_validation_and_json(tmp_path):
    with pytest.raises(ValueError):
        CandidateSet({1: set()})
    with pytest.raises(ValueError):
        CandidateSet({1: {"hunch"}})
    sc = CandidateSet({4: {SHED}, 0: {MANUAL, CURTAILED}}, "test")
    assert list(sc) == [0, 4] and 4 in sc and len(sc) == 2
    path = tmp_path / "sc.json"
    path.write_text(json.dumps(sc.to_dict()))
    again = CandidateSet.load_json(path)
    assert again == sc
    assert CandidateSet.manual([3, 1]).provenance == {1: {MANUAL}, 3: {MANUAL}}
