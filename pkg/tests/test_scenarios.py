from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.distance import cdist

from casebuilder import make_case
from tepstore.grid import parse_case
from tepstore.manifest import bundled_path
from tepstore.scenarios import (ScenarioSet, SeriesError, YearSeries, build_scenarios, cluster_days,
                                day_features, pam, read_series, read_stream_csv,
                                representative_day_table, synthetic_series, total_cost,
                                two_shape_series, write_series)


@pytest.fixture(scope="module")
def case6():
    return parse_case(bundled_path("case6_tep.m"))


def hours_from(start, n):
    return np.arange(np.datetime64(start, "h"), np.datetime64(start, "h") + n)


def test_leap_day_is_dropped():
    hours = hours_from("2024-02-28", 72)
    s = YearSeries(hours, (1,), np.arange(72.0)[:, None])
    assert s.n_days == 2
    assert [str(d) for d in s.day_dates()] == ["2024-02-28", "2024-03-01"]
    assert s.load[24, 0] == 48.0


def test_partial_days_and_bad_values_are_rejected():
    with pytest.raises(SeriesError, match="whole days"):
        YearSeries(hours_from("2022-01-01", 30), (1,), np.ones((30, 1)))
    with pytest.raises(SeriesError, match="midnight"):
        YearSeries(hours_from("2022-01-01T05", 24), (1,), np.ones((24, 1)))
    gap = np.concatenate([hours_from("2022-01-01", 24), hours_from("2022-01-03", 24)])
    with pytest.raises(SeriesError, match="missing hours"):
        YearSeries(gap, (1,), np.ones((48, 1)))
    with pytest.raises(SeriesError, match=r"\[0, 1\]"):
        YearSeries(hours_from("2022-01-01", 24), (1,), np.ones((24, 1)), (7,), ("wind",),
                   np.full((24, 1), 1.5))
    with pytest.raises(SeriesError, match="missing values"):
        load = np.ones((24, 1))
        load[3] = np.nan
        YearSeries(hours_from("2022-01-01", 24), (1,), load)


def test_csv_round_trip(tmp_path, case6):
    series = synthetic_series(case6, 4, seed=5)
    paths = write_series(series, tmp_path)
    again = read_series(paths["load"], paths.get("wind"), paths.get("solar"))
    assert again.bus_ids == series.bus_ids
    assert sorted(again.gen_ids) == sorted(series.gen_ids)
    assert np.array_equal(again.hours, series.hours)
    assert np.allclose(again.load, series.load, atol=5e-5)
    for j, gid in enumerate(series.gen_ids):
        col = again.gen_ids.index(gid)
        assert again.gen_kinds[col] == series.gen_kinds[j]
        assert np.allclose(again.availability[:, col], series.availability[:, j], atol=5e-7)


def test_csv_errors_name_the_file(tmp_path):
    with pytest.raises(FileNotFoundError, match="nope.csv"):
        read_stream_csv(tmp_path / "nope.csv")
    bad = tmp_path / "bad.csv"
    bad.write_text("time,1\n2022-01-01T00:00,3\n")
    with pytest.raises(SeriesError, match="timestamp"):
        read_stream_csv(bad)
    bad.write_text("timestamp,1\n2022-01-01T00:00,3,4\n")
    with pytest.raises(SeriesError, match=r"bad.csv:2"):
        read_stream_csv(bad)


def test_features_are_zscored(case6):
    series = synthetic_series(case6, 40, seed=1)
    feats = day_features(series)
    assert feats.shape == (40, 72)
    for j in range(3):
        block = feats[:, 24 * j:24 * (j + 1)]
        assert block.mean() == pytest.approx(0.0, abs=1e-12)
        assert block.std() == pytest.approx(1.0, rel=1e-12)


def brute_force_medoids(dist, k):
    return min(total_cost(dist, c) for c in itertools.combinations(range(len(dist)), k))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_pam_finds_global_optimum_on_separated_clusters(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, 4))
    centres = np.arange(k)[:, None] * 100.0
    pts = np.vstack([c + rng.normal(size=(int(rng.integers(1, 5)), 2)) for c in centres])
    dist = cdist(pts, pts)
    medoids, labels = pam(dist, k, seed=seed)
    assert total_cost(dist, medoids) == pytest.approx(brute_force_medoids(dist, k), rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 25), st.integers(1, 6))
def test_pam_contract(seed, n, k):
    k = min(k, n)
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(n, 3))
    dist = cdist(pts, pts)
    medoids, labels = pam(dist, k, seed=seed)
    assert medoids == sorted(set(medoids)) and len(medoids) == k
    # Every point is labelled with its nearest medoid, lowest position on ties.
    assert np.array_equal(labels, np.argmin(dist[:, medoids], axis=1))
    assert all(labels[m] == pos for pos, m in enumerate(medoids))
    assert pam(dist, k, seed=seed)[0] == medoids


def test_cluster_days_weights(case6):
    series = synthetic_series(case6, 50, seed=2)
    for k in (1, 3, 7):
        sc = cluster_days(series, k, seed=4)
        assert sc.k == k and list(sc.day_ids) == sorted(sc.day_ids)
        assert math.fsum(sc.weights) == pytest.approx(1.0, abs=1e-12)
        assert np.array_equal(np.bincount(sc.cluster_of_day, minlength=k) / 50, sc.weights)
        assert sc.load_mw.shape == (k, 24, 6)
    with pytest.raises(ValueError):
        cluster_days(series, 51)


def test_two_shapes_with_noise():
    series, truth = two_shape_series(30, noise=0.02, seed=3)
    sc = cluster_days(series, 2)
    pairs = {(int(a), int(b)) for a, b in zip(sc.cluster_of_day, truth)}
    assert len(pairs) == 2
    assert sc.weights.tolist() == [0.5, 0.5]


def test_build_scenarios_units(case6):
    series = synthetic_series(case6, 10, seed=0)
    sc = build_scenarios(case6, series, cluster_days(series, 2), load_factor=1.5)
    d = sc.day_ids[0]
    expected = series.load[series.day_slice(d)] * 1.5 / 100.0
    assert np.allclose(sc.demand[0], expected, rtol=0, atol=1e-15)
    wind = [j for j, g in enumerate(case6.generators) if g.kind == "wind"][0]
    col = series.gen_ids.index(case6.generators[wind].id)
    assert np.allclose(sc.p_max[0, :, wind],
                       series.availability[series.day_slice(d), col] * case6.generators[wind].p_max)
    coal = 0
    assert (sc.p_max[:, :, coal] == case6.generators[coal].p_max).all()
    assert (sc.p_min[:, :, coal] == case6.generators[coal].p_min).all()
    rows = representative_day_table(series, sc)
    assert [r["scenario"] for r in rows] == [1, 2]


def test_missing_series_columns_are_errors(case6):
    series = synthetic_series(case6, 3, seed=0)
    other = make_case([1, 2, 3, 4, 5, 6, 7], [(1, "coal", 10, 0, 1)],
                      [(i, i + 1, 0.1, 10) for i in range(1, 7)])
    with pytest.raises(SeriesError, match="no load series"):
        build_scenarios(other, series, cluster_days(series, 1))
    no_wind = YearSeries(series.hours, series.bus_ids, series.load)
    with pytest.raises(SeriesError, match="no availability series"):
        build_scenarios(case6, no_wind, cluster_days(no_wind, 1))


def test_scenario_set_validation():
    with pytest.raises(SeriesError):
        ScenarioSet((0, 1), np.array([0.5, 0.6]))
    with pytest.raises(SeriesError):
        ScenarioSet((0,), np.array([0.0]))
    sc = ScenarioSet((0, 1), np.array([0.25, 0.75]))
    assert sc.k == 2 and not sc.built


def test_synthetic_series_is_seeded(case6):
    a = synthetic_series(case6, 5, seed=9)
    b = synthetic_series(case6, 5, seed=9)
    c = synthetic_series(case6, 5, seed=10)
    assert np.array_equal(a.load, b.load) and not np.array_equal(a.load, c.load)
