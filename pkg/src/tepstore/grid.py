"""Grid cases: MATPOWER ingestion, per-unit data model and year scaling.

All power quantities inside a :class:`GridCase` are per-unit on
``base_mva``; costs stay in dollars per MWh (or per hour).
"""

from __future__ import annotations

import json
import logging
import math
import re
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

log = logging.getLogger(__name__)

BASE_MVA = 100.0
EARTH_RADIUS_KM = 6371.0088
DEFAULT_LENGTH_KM = 1.0

GEN_KINDS = ("coal", "natural_gas", "nuclear", "solar", "wind", "hydro", "other")
RENEWABLE_KINDS = frozenset({"solar", "wind", "hydro"})


class CaseParseError(ValueError):
    """Malformed case text. ``lineno`` points at the offending line."""

    def __init__(self, msg: str, lineno: int | None = None):
        super().__init__(f"line {lineno}: {msg}" if lineno is not None else msg)
        self.lineno = lineno


class CaseStructureError(ValueError):
    """The parsed network violates a structural invariant (e.g. islands)."""

    def __init__(self, msg: str, components=None):
        super().__init__(msg)
        self.components = components or []


def to_pu(mw, base_mva: float = BASE_MVA):
    return np.asarray(mw, dtype=float) / base_mva if np.ndim(mw) else float(mw) / base_mva


def to_mw(pu, base_mva: float = BASE_MVA):
    return np.asarray(pu, dtype=float) * base_mva if np.ndim(pu) else float(pu) * base_mva


def great_circle_km(lat1, lon1, lat2, lon2) -> float:
    """Haversine distance in kilometres."""
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = p2 - p1
    dl = math.radians(lon2 - lon1)
    a = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(a)))


@dataclass(frozen=True)
class Bus:
    id: int
    name: str
    latitude: float | None = None
    longitude: float | None = None
    area: str | None = None
    load: float = 0.0  # base-year demand, pu

    @property
    def has_coords(self) -> bool:
        return self.latitude is not None and self.longitude is not None


@dataclass(frozen=True)
class Branch:
    id: int
    from_bus: int  # bus index, not id
    to_bus: int
    reactance: float
    thermal_limit: float  # pu; math.inf when the case gives no rating
    length: float = DEFAULT_LENGTH_KM
    angle_min: float = -math.inf
    angle_max: float = math.inf


@dataclass(frozen=True)
class Generator:
    id: int
    bus: int  # bus index
    kind: str
    p_min: float
    p_max: float
    cost_linear: float = 0.0  # $/MWh
    cost_fixed: float = 0.0   # $/h

    @property
    def renewable(self) -> bool:
        return self.kind in RENEWABLE_KINDS


@dataclass(frozen=True)
class GridCase:
    base_mva: float
    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    generators: tuple[Generator, ...]
    name: str = "case"

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(self.buses))
        object.__setattr__(self, "branches", tuple(self.branches))
        object.__setattr__(self, "generators", tuple(self.generators))
        validate_case(self)

    @property
    def n_bus(self) -> int:
        return len(self.buses)

    @property
    def n_branch(self) -> int:
        return len(self.branches)

    @property
    def n_gen(self) -> int:
        return len(self.generators)

    @cached_property
    def bus_index(self) -> dict[int, int]:
        return {b.id: i for i, b in enumerate(self.buses)}

    @cached_property
    def arrays(self) -> "CaseArrays":
        return CaseArrays.from_case(self)


@dataclass(frozen=True)
class CaseArrays:
    """Column views of a case, handy for vectorized model assembly."""

    f: np.ndarray
    t: np.ndarray
    x: np.ndarray
    rating: np.ndarray
    length: np.ndarray
    ang_min: np.ndarray
    ang_max: np.ndarray
    gen_bus: np.ndarray
    p_min: np.ndarray
    p_max: np.ndarray
    cost_linear: np.ndarray
    cost_fixed: np.ndarray
    renewable: np.ndarray
    load: np.ndarray

    def __post_init__(self):
        # Shared by every caller through the case's cache, so never writable.
        for arr in vars(self).values():
            arr.setflags(write=False)

    @classmethod
    def from_case(cls, case: GridCase) -> "CaseArrays":
        br, gens = case.branches, case.generators

        def col(items, attr, dtype=float):
            return np.array([getattr(it, attr) for it in items], dtype=dtype)

        return cls(
            f=col(br, "from_bus", int), t=col(br, "to_bus", int), x=col(br, "reactance"),
            rating=col(br, "thermal_limit"), length=col(br, "length"),
            ang_min=col(br, "angle_min"), ang_max=col(br, "angle_max"),
            gen_bus=col(gens, "bus", int), p_min=col(gens, "p_min"), p_max=col(gens, "p_max"),
            cost_linear=col(gens, "cost_linear"), cost_fixed=col(gens, "cost_fixed"),
            renewable=np.array([g.renewable for g in gens], dtype=bool),
            load=col(case.buses, "load"),
        )


def validate_case(case: GridCase) -> None:
    n = len(case.buses)
    if n == 0:
        raise CaseStructureError("case has no buses")
    if len({b.id for b in case.buses}) != n:
        raise CaseStructureError("duplicate bus ids")
    for b in case.buses:
        if b.has_coords and not (math.isfinite(b.latitude) and math.isfinite(b.longitude)):
            raise CaseStructureError(f"bus {b.id} has non-finite coordinates")
    for br in case.branches:
        if not (0 <= br.from_bus < n and 0 <= br.to_bus < n):
            raise CaseStructureError(f"branch {br.id} refers to a missing bus")
        if br.from_bus == br.to_bus:
            raise CaseStructureError(f"branch {br.id} is a self-loop")
        if not br.reactance > 0:
            raise CaseStructureError(f"branch {br.id} has non-positive reactance {br.reactance}")
        if not br.thermal_limit >= 0:
            raise CaseStructureError(f"branch {br.id} has negative thermal limit")
        if not br.angle_min <= 0 <= br.angle_max:
            raise CaseStructureError(f"branch {br.id} angle bounds exclude zero")
    for g in case.generators:
        if not 0 <= g.bus < n:
            raise CaseStructureError(f"generator {g.id} refers to a missing bus")
        if g.kind not in GEN_KINDS:
            raise CaseStructureError(f"generator {g.id} has unknown kind {g.kind!r}")
        if not 0 <= g.p_min <= g.p_max:
            raise CaseStructureError(f"generator {g.id} needs 0 <= p_min <= p_max")
        if g.renewable and g.p_min != 0:
            raise CaseStructureError(f"renewable generator {g.id} must have p_min = 0")
    comps = network_components(n, [(br.from_bus, br.to_bus) for br in case.branches])
    if len(comps) > 1:
        listing = "; ".join(
            "[" + ", ".join(str(case.buses[i].id) for i in c[:10]) + (" ..." if len(c) > 10 else "") + "]"
            for c in comps
        )
        raise CaseStructureError(f"network has {len(comps)} islands: {listing}", comps)


def network_components(n: int, edges) -> list[list[int]]:
    edges = list(edges)
    rows = [e[0] for e in edges]
    cols = [e[1] for e in edges]
    graph = sp.coo_matrix((np.ones(len(edges)), (rows, cols)), shape=(n, n))
    k, labels = connected_components(graph, directed=False)
    return [sorted(np.flatnonzero(labels == c).tolist()) for c in range(k)]


# ---------------------------------------------------------------------------
# MATPOWER parsing

_ASSIGN = re.compile(r"^\s*mpc\.(\w+)\s*=\s*(.*)$")

_FUEL_PATTERNS = (
    ("coal", ("coal", "lignite")),
    ("natural_gas", ("ng", "gas", "natural")),
    ("nuclear", ("nuc",)),
    ("solar", ("solar", "pv", "sun")),
    ("wind", ("wind", "wnd")),
    ("hydro", ("hydro", "water", "hyd")),
)


def fuel_kind(fuel: str | None) -> str:
    """Map a case fuel label onto one of :data:`GEN_KINDS`."""
    if not fuel:
        return "other"
    s = fuel.strip().strip("'\"").lower()
    for kind, keys in _FUEL_PATTERNS:
        if any(s == k or s.startswith(k) for k in keys):
            return kind
    return "other"


def _strip_comment(line: str) -> str:
    out, quote = [], None
    for ch in line:
        if quote:
            if ch == quote:
                quote = None
        elif ch in "'\"":
            quote = ch
        elif ch == "%":
            break
        out.append(ch)
    return "".join(out)


def _read_blocks(text: str):
    """Yield ``(name, kind, payload, lineno)`` for every ``mpc.<name> = ...``.

    ``kind`` is ``scalar``, ``matrix`` (payload: list of (lineno, row tokens))
    or ``cell`` (payload: list of (lineno, strings)).
    """
    lines = text.splitlines()
    i = 0
    while i < len(lines):
        line = _strip_comment(lines[i])
        m = _ASSIGN.match(line)
        if not m:
            i += 1
            continue
        name, rest = m.group(1), m.group(2).strip()
        start = i + 1
        if rest.startswith("[") or rest.startswith("{"):
            opener = rest[0]
            closer = "]" if opener == "[" else "}"
            body: list[tuple[int, str]] = []
            chunk = rest[1:]
            lineno = start
            while True:
                if closer in chunk:
                    body.append((lineno, chunk[:chunk.index(closer)]))
                    break
                body.append((lineno, chunk))
                i += 1
                if i >= len(lines):
                    raise CaseParseError(f"unterminated mpc.{name}", start)
                lineno = i + 1
                chunk = _strip_comment(lines[i])
            rows = []
            for ln, content in body:
                for piece in content.split(";"):
                    toks = piece.replace(",", " ").split()
                    if toks:
                        rows.append((ln, toks))
            yield name, ("matrix" if opener == "[" else "cell"), rows, start
        else:
            yield name, "scalar", rest.rstrip(";").strip(), start
        i += 1


def _numeric(rows, name, min_cols):
    out = []
    for ln, toks in rows:
        try:
            vals = [float(t) for t in toks]
        except ValueError:
            bad = next(t for t in toks if not _is_float(t))
            raise CaseParseError(f"mpc.{name}: non-numeric entry {bad!r}", ln) from None
        if len(vals) < min_cols:
            raise CaseParseError(f"mpc.{name}: expected at least {min_cols} columns, got {len(vals)}", ln)
        out.append((ln, vals))
    return out


def _is_float(t: str) -> bool:
    try:
        float(t)
        return True
    except ValueError:
        return False


def _angle(deg: float, default: float) -> float:
    if abs(deg) >= 360:
        return default
    return math.radians(deg)


def parse_case(path) -> GridCase:
    """Parse a MATPOWER ``.m`` case file."""
    path = Path(path)
    return parse_case_text(path.read_text(), name=path.stem)


def parse_case_text(text: str, name: str = "case") -> GridCase:
    """Parse MATPOWER case text.

    Besides the standard ``bus``/``gen``/``branch``/``gencost`` matrices the
    parser understands ``genfuel`` and ``bus_name`` cell arrays, an optional
    ``bus_geo`` matrix (``bus_id lat lon``) and an optional ``branch_length``
    column (km, one row per branch).
    """
    blocks = {}
    for bname, kind, payload, lineno in _read_blocks(text):
        blocks[bname] = (kind, payload, lineno)
    for required in ("bus", "gen", "branch", "gencost"):
        if required not in blocks:
            raise CaseParseError(f"missing mpc.{required} section")

    base = BASE_MVA
    if "baseMVA" in blocks:
        kind, payload, ln = blocks["baseMVA"]
        try:
            base = float(payload)
        except (TypeError, ValueError):
            raise CaseParseError(f"bad baseMVA {payload!r}", ln) from None
        if base <= 0:
            raise CaseParseError("baseMVA must be positive", ln)

    bus_rows = _numeric(blocks["bus"][1], "bus", 13)
    gen_rows = _numeric(blocks["gen"][1], "gen", 10)
    br_rows = _numeric(blocks["branch"][1], "branch", 11)
    cost_rows = _numeric(blocks["gencost"][1], "gencost", 4)
    if len(cost_rows) < len(gen_rows):
        raise CaseParseError(
            f"mpc.gencost has {len(cost_rows)} rows for {len(gen_rows)} generators",
            blocks["gencost"][2])

    names = _cell(blocks, "bus_name")
    fuels = _cell(blocks, "genfuel")
    geo = {}
    if "bus_geo" in blocks:
        for ln, vals in _numeric(blocks["bus_geo"][1], "bus_geo", 3):
            geo[int(vals[0])] = (vals[1], vals[2])
    lengths = None
    if "branch_length" in blocks:
        lengths = [v[1][0] for v in _numeric(blocks["branch_length"][1], "branch_length", 1)]
        if len(lengths) != len(br_rows):
            raise CaseParseError("mpc.branch_length must have one row per branch",
                                 blocks["branch_length"][2])

    buses = []
    index = {}
    for k, (ln, v) in enumerate(bus_rows):
        bid = int(v[0])
        if bid in index:
            raise CaseParseError(f"duplicate bus id {bid}", ln)
        index[bid] = len(buses)
        lat, lon = geo.get(bid, (None, None))
        nm = names[k] if names and k < len(names) else str(bid)
        buses.append(Bus(bid, nm, lat, lon, str(int(v[6])), v[2] / base))

    def bus_of(bid, ln):
        if bid not in index:
            raise CaseParseError(f"reference to unknown bus {bid}", ln)
        return index[bid]

    branches = []
    dropped_br = 0
    for k, (ln, v) in enumerate(br_rows):
        if int(v[10]) == 0:
            dropped_br += 1
            continue
        f, t = bus_of(int(v[0]), ln), bus_of(int(v[1]), ln)
        rate = v[5]
        amin = _angle(v[11], -math.inf) if len(v) > 12 else -math.inf
        amax = _angle(v[12], math.inf) if len(v) > 12 else math.inf
        if len(v) > 12 and v[11] == 0 and v[12] == 0:
            amin, amax = -math.inf, math.inf
        if lengths is not None:
            length = lengths[k]
        elif buses[f].has_coords and buses[t].has_coords:
            length = great_circle_km(buses[f].latitude, buses[f].longitude,
                                     buses[t].latitude, buses[t].longitude)
        else:
            length = DEFAULT_LENGTH_KM
        if v[3] <= 0:
            raise CaseParseError(f"branch {v[0]:.0f}-{v[1]:.0f} has non-positive reactance", ln)
        branches.append(Branch(len(branches) + 1, f, t, v[3],
                               rate / base if rate > 0 else math.inf, length, amin, amax))
    if dropped_br:
        log.info("dropped %d out-of-service branches", dropped_br)
    if lengths is None and not geo and branches:
        log.warning("case has no coordinates; branch lengths default to %.1f km", DEFAULT_LENGTH_KM)

    gens = []
    for k, (ln, v) in enumerate(gen_rows):
        if int(v[7]) <= 0:
            continue
        kind = fuel_kind(fuels[k] if fuels and k < len(fuels) else None)
        p_max = max(v[8], 0.0) / base
        p_min = 0.0 if kind in RENEWABLE_KINDS else min(max(v[9], 0.0) / base, p_max)
        c1, c0 = _linear_cost(cost_rows[k])
        gens.append(Generator(len(gens) + 1, bus_of(int(v[0]), ln), kind, p_min, p_max, c1, c0))
    return GridCase(base, buses, branches, gens, name=name)


def _cell(blocks, key):
    if key not in blocks:
        return None
    kind, rows, ln = blocks[key]
    out = []
    for _, toks in rows:
        out.append(" ".join(toks).strip().strip("'\""))
    return out


def _linear_cost(row) -> tuple[float, float]:
    """Reduce a gencost row to (slope $/MWh, constant $/h)."""
    ln, v = row
    model, n = int(v[0]), int(v[3])
    coeffs = v[4:]
    if len(coeffs) < (2 * n if model == 1 else n):
        raise CaseParseError("gencost row shorter than its NCOST", ln)
    if model == 2:
        c = coeffs[:n]
        c1 = c[-2] if n >= 2 else 0.0
        c0 = c[-1] if n >= 1 else 0.0
        return c1, c0
    if model == 1:
        pts = coeffs[:2 * n]
        p, f = pts[0::2], pts[1::2]
        if n < 2 or p[-1] == p[0]:
            return 0.0, f[0] if n else 0.0
        slope = (f[-1] - f[0]) / (p[-1] - p[0])
        return slope, f[0] - slope * p[0]
    raise CaseParseError(f"unknown gencost model {model}", ln)


# ---------------------------------------------------------------------------
# Year scaling


@dataclass(frozen=True)
class ScalingTable:
    """Multiplicative capacity factors per (kind, year) and load factor per year."""

    generation: dict = field(default_factory=dict)  # kind -> {year: factor}
    load: dict = field(default_factory=dict)        # year -> factor
    base_year: int = 2022

    def __post_init__(self):
        gen = {k: {int(y): float(f) for y, f in v.items()} for k, v in self.generation.items()}
        load = {int(y): float(f) for y, f in self.load.items()}
        object.__setattr__(self, "generation", gen)
        object.__setattr__(self, "load", load)
        for kind, series in gen.items():
            if kind not in GEN_KINDS:
                raise ValueError(f"unknown generator kind {kind!r}")
            for y, f in series.items():
                if not f > 0:
                    raise ValueError(f"factor for {kind} {y} must be positive")
            if self.base_year in series and series[self.base_year] != 1.0:
                raise ValueError(f"base-year factor for {kind} must be 1.00")
        for y, f in load.items():
            if not f > 0:
                raise ValueError(f"load factor for {y} must be positive")
        if self.base_year in load and load[self.base_year] != 1.0:
            raise ValueError("base-year load factor must be 1.00")

    @property
    def years(self) -> list[int]:
        return sorted(self.load)

    def factor(self, kind: str, year: int) -> float | None:
        if year == self.base_year:
            return 1.0
        series = self.generation.get(kind)
        if series is None:
            return None
        if year not in series:
            raise KeyError(f"no {kind} factor for {year}")
        return series[year]

    def load_factor(self, year: int) -> float:
        if year == self.base_year:
            return 1.0
        if year not in self.load:
            raise KeyError(f"no load factor for {year}")
        return self.load[year]

    @classmethod
    def from_dict(cls, data: dict) -> "ScalingTable":
        return cls(data.get("generation", {}), data.get("load", {}), int(data.get("base_year", 2022)))

    def to_dict(self) -> dict:
        return {
            "base_year": self.base_year,
            "generation": {k: {str(y): f for y, f in sorted(v.items())} for k, v in sorted(self.generation.items())},
            "load": {str(y): f for y, f in sorted(self.load.items())},
        }

    @classmethod
    def load_json(cls, path) -> "ScalingTable":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


_YEARS = (2022, 2030, 2035, 2040, 2045, 2050)


def _row(*vals):
    return dict(zip(_YEARS, vals))


# Generation capacity and load growth factors relative to 2022.
PROJECTIONS = ScalingTable(
    generation={
        "coal": _row(1.00, 0.82, 0.82, 0.82, 0.82, 0.82),
        "natural_gas": _row(1.00, 0.79, 0.73, 0.71, 0.72, 0.72),
        "nuclear": _row(1.00, 0.98, 0.90, 0.80, 0.80, 0.80),
        "solar": _row(1.00, 4.51, 6.00, 6.87, 8.04, 9.26),
        "wind": _row(1.00, 2.02, 2.23, 2.26, 2.32, 2.43),
    },
    load=_row(1.00, 1.13, 1.21, 1.31, 1.41, 1.52),
    base_year=2022,
)


def scale_case(case: GridCase, table: ScalingTable, year: int) -> tuple[GridCase, float]:
    """Scale generator capacities to ``year``; return ``(scaled_case, load_factor)``.

    Kinds absent from the table keep factor 1.0 and are logged. The load
    factor is returned rather than applied since demand profiles live in the
    scenario data.
    """
    load_factor = table.load_factor(year)
    unscaled = set()
    gens = []
    for g in case.generators:
        f = table.factor(g.kind, year)
        if f is None:
            unscaled.add(g.kind)
            f = 1.0
        p_min = 0.0 if g.renewable else g.p_min * f
        gens.append(replace(g, p_min=p_min, p_max=g.p_max * f))
    for kind in sorted(unscaled):
        log.warning("no %s factor for %d; capacity left unscaled", kind, year)
    return replace(case, generators=tuple(gens)), load_factor


def unscaled_kinds(case: GridCase, table: ScalingTable) -> list[str]:
    """Generator kinds present in ``case`` that ``table`` does not scale."""
    return sorted({g.kind for g in case.generators if g.kind not in table.generation})
