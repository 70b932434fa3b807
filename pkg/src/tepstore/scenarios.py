"""Hourly time series and representative-day selection.

A :class:`YearSeries` holds whole days of hourly bus load (MW) and
renewable availability factors. :func:`cluster_days` picks ``k`` medoid
days with PAM on z-scored daily profiles of three system streams (total
load, mean wind availability, mean solar availability); the resulting
:class:`ScenarioSet` weights each medoid by its cluster's share of days.
:func:`build_scenarios` then turns the medoid slices into per-unit demand
and generator limits for a (scaled) grid case.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from .grid import GridCase

log = logging.getLogger(__name__)

HOURS_PER_DAY = 24
STREAMS = ("load", "wind", "solar")


class SeriesError(ValueError):
    """Inconsistent or malformed time-series input."""


@dataclass(frozen=True, eq=False)
class YearSeries:
    """Hourly load per bus and availability per renewable generator.

    Parameters
    ----------
    hours : ndarray of datetime64[h], shape (H,)
        Hour stamps. Feb 29 is removed on construction.
    bus_ids : tuple of int
        Bus ids labelling the columns of ``load``.
    load : ndarray, shape (H, n_bus)
        Demand in MW.
    gen_ids : tuple of int
        Generator ids labelling the columns of ``availability``.
    gen_kinds : tuple of str
        ``"wind"``, ``"solar"`` or ``"hydro"`` for each availability column.
    availability : ndarray, shape (H, n_ren)
        Fraction of nameplate available, within [0, 1].
    """

    hours: np.ndarray
    bus_ids: tuple
    load: np.ndarray
    gen_ids: tuple = ()
    gen_kinds: tuple = ()
    availability: np.ndarray = field(default=None)

    def __post_init__(self):
        hours = np.asarray(self.hours, dtype="datetime64[h]")
        load = np.asarray(self.load, dtype=float)
        avail = (np.zeros((len(hours), 0)) if self.availability is None
                 else np.asarray(self.availability, dtype=float))
        if load.ndim != 2 or load.shape[0] != len(hours):
            raise SeriesError("load must be shaped (hours, buses)")
        if avail.ndim != 2 or avail.shape[0] != len(hours):
            raise SeriesError("availability must be shaped (hours, generators)")
        if load.shape[1] != len(self.bus_ids):
            raise SeriesError("one load column per bus id is required")
        if avail.shape[1] != len(self.gen_ids) or len(self.gen_ids) != len(self.gen_kinds):
            raise SeriesError("one availability column and kind per generator id is required")

        keep = ~_is_leap_day(hours)
        if not keep.all():
            hours, load, avail = hours[keep], load[keep], avail[keep]
        if len(hours) == 0 or len(hours) % HOURS_PER_DAY:
            raise SeriesError(f"series must cover whole days, got {len(hours)} hours")
        if not _whole_days(hours):
            raise SeriesError("series must start at midnight and have no missing hours")
        if not (np.isfinite(load).all() and np.isfinite(avail).all()):
            raise SeriesError("series contains missing values")
        if (avail < 0).any() or (avail > 1).any():
            raise SeriesError("availability factors must lie in [0, 1]")
        for arr in (hours, load, avail):
            arr.setflags(write=False)
        object.__setattr__(self, "hours", hours)
        object.__setattr__(self, "load", load)
        object.__setattr__(self, "availability", avail)
        object.__setattr__(self, "bus_ids", tuple(int(b) for b in self.bus_ids))
        object.__setattr__(self, "gen_ids", tuple(int(g) for g in self.gen_ids))
        object.__setattr__(self, "gen_kinds", tuple(self.gen_kinds))

    @property
    def n_days(self) -> int:
        return len(self.hours) // HOURS_PER_DAY

    def day_slice(self, day: int) -> slice:
        if not 0 <= day < self.n_days:
            raise IndexError(f"day {day} outside series of {self.n_days} days")
        return slice(day * HOURS_PER_DAY, (day + 1) * HOURS_PER_DAY)

    def day_dates(self) -> np.ndarray:
        return self.hours[::HOURS_PER_DAY].astype("datetime64[D]")

    def stream_matrix(self) -> np.ndarray:
        """Daily profiles of the three system streams, shape (days, 3, 24)."""
        system_load = self.load.sum(axis=1)
        streams = [system_load]
        for kind in ("wind", "solar"):
            cols = [j for j, k in enumerate(self.gen_kinds) if k == kind]
            if cols:
                streams.append(self.availability[:, cols].mean(axis=1))
            else:
                streams.append(np.zeros(len(self.hours)))
        return np.stack([s.reshape(self.n_days, HOURS_PER_DAY) for s in streams], axis=1)


def _is_leap_day(hours: np.ndarray) -> np.ndarray:
    days = hours.astype("datetime64[D]")
    months = hours.astype("datetime64[M]")
    day_of_month = (days - months.astype("datetime64[D]")).astype(int) + 1
    month_of_year = months.astype(int) % 12 + 1
    return (month_of_year == 2) & (day_of_month == 29)


def _whole_days(hours: np.ndarray) -> bool:
    if (hours[0] - hours[0].astype("datetime64[D]")).astype(int) != 0:
        return False
    steps = np.diff(hours).astype(int)
    # A removed Feb 29 leaves a 25 hour step from Feb 28 23:00 to Mar 1 00:00.
    ok = (steps == 1) | ((steps == 25) & _is_leap_day(hours[:-1] + np.timedelta64(1, "h")))
    return bool(ok.all())


@dataclass(frozen=True, eq=False)
class ScenarioSet:
    """Weighted representative days.

    ``load_mw`` and ``availability`` are the verbatim medoid slices of the
    source series. ``demand``, ``p_max`` and ``p_min`` are filled in by
    :func:`build_scenarios` (per-unit, shaped ``(k, T, n_bus)`` and
    ``(k, T, n_gen)``); scenario sets built directly for small studies may
    supply only those.
    """

    day_ids: tuple
    weights: np.ndarray
    load_mw: np.ndarray | None = None
    availability: np.ndarray | None = None
    demand: np.ndarray | None = None
    p_max: np.ndarray | None = None
    p_min: np.ndarray | None = None
    cluster_of_day: np.ndarray | None = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or len(w) != len(self.day_ids) or len(w) == 0:
            raise SeriesError("one weight per scenario is required")
        if (w <= 0).any():
            raise SeriesError("scenario weights must be positive")
        if abs(math.fsum(w) - 1.0) > 1e-12:
            raise SeriesError(f"scenario weights sum to {math.fsum(w)!r}, not 1")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "day_ids", tuple(int(d) for d in self.day_ids))
        for name in ("demand", "p_max", "p_min"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.asarray(arr, dtype=float)
                if arr.ndim != 3 or arr.shape[0] != len(w):
                    raise SeriesError(f"{name} must be shaped (scenarios, hours, entities)")
                object.__setattr__(self, name, arr)
        if self.built:
            if not (self.demand.shape[1] == self.p_max.shape[1] == self.p_min.shape[1]):
                raise SeriesError("demand and generator profiles disagree on hours per day")
            if (self.p_min > self.p_max + 1e-12).any() or (self.p_min < 0).any():
                raise SeriesError("generator profiles need 0 <= p_min <= p_max")

    @property
    def k(self) -> int:
        return len(self.day_ids)

    @property
    def built(self) -> bool:
        return self.demand is not None and self.p_max is not None and self.p_min is not None

    @property
    def T(self) -> int:
        if self.demand is not None:
            return self.demand.shape[1]
        return self.load_mw.shape[1]


def cluster_days(series: YearSeries, k: int, seed: int = 0) -> ScenarioSet:
    """Select ``k`` representative days by PAM k-medoids.

    Parameters
    ----------
    series : YearSeries
    k : int
        Number of representative days, ``1 <= k <= series.n_days``.
    seed : int
        Seed for the k-medoids++ build phase.

    Returns
    -------
    ScenarioSet
        Medoid day indices in ascending order, weights equal to cluster
        size over number of days, and the medoids' load and availability
        slices.
    """
    n = series.n_days
    if not 1 <= k <= n:
        raise ValueError(f"k must be between 1 and the number of days ({n}), got {k}")
    features = day_features(series)
    dist = cdist(features, features)
    medoids, labels = pam(dist, k, seed)
    sizes = np.bincount(labels, minlength=k)
    weights = sizes / n
    load = np.stack([series.load[series.day_slice(d)] for d in medoids])
    avail = np.stack([series.availability[series.day_slice(d)] for d in medoids])
    return ScenarioSet(tuple(medoids), weights, load_mw=load, availability=avail,
                       cluster_of_day=labels)


def day_features(series: YearSeries) -> np.ndarray:
    """72-dimensional day vectors, each stream z-scored over all its hours."""
    streams = series.stream_matrix()  # (days, 3, 24)
    out = np.empty_like(streams)
    for s in range(streams.shape[1]):
        block = streams[:, s, :]
        sd = block.std()
        out[:, s, :] = (block - block.mean()) / (sd if sd > 0 else 1.0)
    return out.reshape(streams.shape[0], -1)


def pam(dist: np.ndarray, k: int, seed: int = 0) -> tuple[list[int], np.ndarray]:
    """Partitioning around medoids on a precomputed distance matrix.

    The build phase is k-medoids++ (first medoid uniform, later ones with
    probability proportional to squared distance to the nearest chosen
    medoid). The swap phase repeatedly applies the single (medoid,
    non-medoid) exchange with the largest cost reduction until none
    reduces the total distance.

    Returns
    -------
    medoids : list of int
        Sorted medoid indices.
    labels : ndarray of int
        Position in ``medoids`` of each point's nearest medoid (lowest
        position on ties).
    """
    n = dist.shape[0]
    rng = np.random.default_rng(seed)
    medoids = [int(rng.integers(n))]
    while len(medoids) < k:
        dmin = dist[:, medoids].min(axis=1)
        prob = dmin ** 2
        prob[medoids] = 0.0
        total = prob.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=prob / total))
        else:
            free = np.setdiff1d(np.arange(n), medoids)
            nxt = int(rng.choice(free))
        medoids.append(nxt)

    cost = total_cost(dist, medoids)
    while True:
        best = (0.0, None, None)
        d_sorted = np.sort(dist[:, medoids], axis=1)
        nearest = np.argmin(dist[:, medoids], axis=1)
        d1 = d_sorted[:, 0]
        d2 = d_sorted[:, 1] if k > 1 else np.full(n, np.inf)
        is_medoid = np.zeros(n, dtype=bool)
        is_medoid[medoids] = True
        for pos in range(k):
            # Distance of each point to the remaining medoids once ``pos`` leaves.
            base = np.where(nearest == pos, d2, d1)
            new = np.minimum(base[:, None], dist).sum(axis=0)  # one entry per candidate
            new[is_medoid] = np.inf
            o = int(np.argmin(new))
            delta = new[o] - cost
            if delta < best[0] - 1e-12 * max(1.0, cost):
                best = (delta, pos, o)
        if best[1] is None:
            break
        medoids[best[1]] = best[2]
        cost = total_cost(dist, medoids)

    medoids = sorted(medoids)
    labels = np.argmin(dist[:, medoids], axis=1)
    return medoids, labels


def total_cost(dist: np.ndarray, medoids) -> float:
    return float(dist[:, list(medoids)].min(axis=1).sum())


def build_scenarios(case: GridCase, series: YearSeries, clustering: ScenarioSet,
                    load_factor: float = 1.0) -> ScenarioSet:
    """Per-unit demand and generator limits for each representative day.

    ``case`` should already be scaled to the planning year; bus loads are
    multiplied by ``load_factor``. Renewable limits are availability times
    (scaled) nameplate; thermal limits are constant over the day. Hydro
    units without an availability column are taken as fully available.
    """
    if load_factor <= 0:
        raise ValueError("load factor must be positive")
    for d in clustering.day_ids:
        if not 0 <= d < series.n_days:
            raise IndexError(f"day {d} outside series of {series.n_days} days")
    bus_col = {b: j for j, b in enumerate(series.bus_ids)}
    missing = [b.id for b in case.buses if b.id not in bus_col]
    if missing:
        raise SeriesError(f"no load series for buses {missing[:10]}")
    extra = set(series.bus_ids) - {b.id for b in case.buses}
    if extra:
        raise SeriesError(f"load series for unknown buses {sorted(extra)[:10]}")
    gen_col = {g: j for j, g in enumerate(series.gen_ids)}

    T = HOURS_PER_DAY
    k = clustering.k
    order = [bus_col[b.id] for b in case.buses]
    demand = np.empty((k, T, case.n_bus))
    p_max = np.empty((k, T, case.n_gen))
    p_min = np.empty((k, T, case.n_gen))
    for s, d in enumerate(clustering.day_ids):
        sl = series.day_slice(d)
        demand[s] = series.load[sl][:, order] * load_factor / case.base_mva
        for j, g in enumerate(case.generators):
            if g.renewable:
                if g.id in gen_col:
                    avail = series.availability[sl, gen_col[g.id]]
                elif g.kind == "hydro":
                    avail = np.ones(T)
                else:
                    raise SeriesError(f"no availability series for {g.kind} generator {g.id}")
                p_max[s, :, j] = avail * g.p_max
                p_min[s, :, j] = 0.0
            else:
                p_max[s, :, j] = g.p_max
                p_min[s, :, j] = g.p_min
    return ScenarioSet(clustering.day_ids, clustering.weights,
                       load_mw=clustering.load_mw, availability=clustering.availability,
                       demand=demand, p_max=p_max, p_min=p_min,
                       cluster_of_day=clustering.cluster_of_day)


def representative_day_table(series: YearSeries, scenarios: ScenarioSet) -> list[dict]:
    """Per-scenario weight and daily means of the three clustering streams."""
    streams = series.stream_matrix()
    dates = series.day_dates()
    rows = []
    for s, d in enumerate(scenarios.day_ids):
        rows.append({
            "scenario": s + 1,
            "date": str(dates[d]),
            "weight": float(scenarios.weights[s]),
            "mean_load_mw": float(streams[d, 0].mean()),
            "mean_wind_availability": float(streams[d, 1].mean()),
            "mean_solar_availability": float(streams[d, 2].mean()),
        })
    return rows


# ---------------------------------------------------------------------------
# CSV input/output


def read_stream_csv(path) -> tuple[np.ndarray, list[int], np.ndarray]:
    """Read one stream file: header ``timestamp,<id>,<id>,...`` then hourly rows.

    Timestamps are ISO 8601 (``2022-01-01T00:00`` or ``2022-01-01 00:00``).
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"series file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SeriesError(f"{path}: empty file") from None
        if not header or header[0].strip().lower() != "timestamp":
            raise SeriesError(f"{path}: first column must be 'timestamp'")
        try:
            ids = [int(h) for h in header[1:]]
        except ValueError:
            raise SeriesError(f"{path}: entity ids in the header must be integers") from None
        stamps, rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise SeriesError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                stamps.append(np.datetime64(row[0].strip().replace(" ", "T"), "h"))
                rows.append([float(v) for v in row[1:]])
            except ValueError as exc:
                raise SeriesError(f"{path}:{lineno}: {exc}") from None
    values = np.array(rows, dtype=float).reshape(len(rows), len(ids))
    return np.array(stamps, dtype="datetime64[h]"), ids, values


def write_stream_csv(path, hours, ids, values, fmt: str = "%.6f") -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp"] + [str(i) for i in ids])
        for h, row in zip(np.asarray(hours, dtype="datetime64[h]"), values):
            w.writerow([str(h) + ":00"] + [fmt % v for v in row])


def read_series(load_path, wind_path=None, solar_path=None, hydro_path=None) -> YearSeries:
    """Assemble a :class:`YearSeries` from one CSV per stream."""
    hours, bus_ids, load = read_stream_csv(load_path)
    gen_ids, kinds, cols = [], [], []
    for kind, p in (("wind", wind_path), ("solar", solar_path), ("hydro", hydro_path)):
        if p is None:
            continue
        h, ids, vals = read_stream_csv(p)
        if len(h) != len(hours) or (h != hours).any():
            raise SeriesError(f"{p}: timestamps differ from the load file")
        gen_ids += ids
        kinds += [kind] * len(ids)
        cols.append(vals)
    avail = np.hstack(cols) if cols else np.zeros((len(hours), 0))
    return YearSeries(hours, tuple(bus_ids), load, tuple(gen_ids), tuple(kinds), avail)


def write_series(series: YearSeries, directory) -> dict[str, Path]:
    """Write ``series`` as ``load.csv`` plus one availability file per kind."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {"load": directory / "load.csv"}
    write_stream_csv(paths["load"], series.hours, series.bus_ids, series.load, "%.4f")
    for kind in ("wind", "solar", "hydro"):
        cols = [j for j, k in enumerate(series.gen_kinds) if k == kind]
        if not cols:
            continue
        paths[kind] = directory / f"{kind}.csv"
        write_stream_csv(paths[kind], series.hours, [series.gen_ids[j] for j in cols],
                         series.availability[:, cols])
    return paths


# ---------------------------------------------------------------------------
# Synthetic data


def synthetic_series(case: GridCase, n_days: int = 365, seed: int = 0,
                     start: str = "2022-01-01") -> YearSeries:
    """A plausible year of hourly data for ``case``.

    Load follows a two-peak daily shape with a summer bump, wind is a
    smoothed random walk with a nightly lift, and solar is a clipped sine
    with day-to-day cloudiness. Useful for demos and tests; not a
    substitute for measured data.
    """
    rng = np.random.default_rng(seed)
    hours = np.arange(np.datetime64(start, "h"), np.datetime64(start, "h") + 24 * n_days + 48)
    hours = hours[~_is_leap_day(hours)][: 24 * n_days]
    H = len(hours)
    hod = np.arange(H) % 24
    doy = (hours.astype("datetime64[D]") - hours.astype("datetime64[Y]").astype("datetime64[D]")).astype(int)
    season = 1.0 + 0.25 * np.exp(-((doy - 200) / 45.0) ** 2) + 0.08 * np.exp(-((doy - 20) / 25.0) ** 2)
    daily = 0.75 + 0.15 * np.exp(-((hod - 8) / 2.5) ** 2) + 0.25 * np.exp(-((hod - 18) / 3.0) ** 2)
    day_noise = np.repeat(rng.normal(1.0, 0.04, n_days), 24)
    base = np.array([b.load for b in case.buses]) * case.base_mva
    load = (season * daily * day_noise)[:, None] * base[None, :] * rng.normal(1.0, 0.01, (H, len(base)))

    gen_ids, kinds, cols = [], [], []
    regime = np.repeat(rng.uniform(0.15, 0.75, n_days), 24)
    for g in case.generators:
        if g.kind == "wind":
            walk = np.cumsum(rng.normal(0, 0.04, H))
            walk -= np.convolve(walk, np.ones(72) / 72, mode="same")
            night = 0.12 * np.cos(2 * np.pi * (hod - 2) / 24)
            cols.append(np.clip(regime + walk + night, 0.0, 1.0))
        elif g.kind == "solar":
            sun = np.clip(np.sin(np.pi * (hod - 6) / 13), 0.0, None)
            sky = np.repeat(rng.uniform(0.45, 1.0, n_days), 24)
            cols.append(np.clip(sun * sky * (0.9 + 0.1 * np.sin(2 * np.pi * (doy - 80) / 365)), 0.0, 1.0))
        else:
            continue
        gen_ids.append(g.id)
        kinds.append(g.kind)
    avail = np.column_stack(cols) if cols else np.zeros((H, 0))
    return YearSeries(hours, tuple(b.id for b in case.buses), load, tuple(gen_ids), tuple(kinds), avail)


def two_shape_series(n_days: int = 20, start: str = "2022-01-01", noise: float = 0.0,
                     seed: int = 0) -> tuple[YearSeries, np.ndarray]:
    """Single-bus series alternating between two distinct day shapes.

    Returns the series and the shape label (0 or 1) of every day.
    """
    rng = np.random.default_rng(seed)
    hod = np.arange(24)
    shape_a = (100 + 40 * np.sin(np.pi * hod / 23), 0.8 - 0.02 * hod, np.zeros(24))
    sun = np.clip(np.sin(np.pi * (hod - 6) / 12), 0, None)
    shape_b = (60 + 10 * np.cos(np.pi * hod / 23), 0.1 + 0.01 * hod, 0.9 * sun)
    labels = np.arange(n_days) % 2
    load, wind, solar = [], [], []
    for lab in labels:
        shp = shape_a if lab == 0 else shape_b
        jitter = 1.0 + noise * rng.standard_normal(24) if noise else 1.0
        load.append(shp[0] * jitter)
        wind.append(np.clip(shp[1] * jitter, 0, 1))
        solar.append(np.clip(shp[2] * jitter, 0, 1))
    hours = np.arange(np.datetime64(start, "h"), np.datetime64(start, "h") + 24 * n_days)
    avail = np.column_stack([np.concatenate(wind), np.concatenate(solar)])
    series = YearSeries(hours, (1,), np.concatenate(load)[:, None], (1, 2), ("wind", "solar"), avail)
    return series, labels
