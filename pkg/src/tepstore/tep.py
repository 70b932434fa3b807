"""Two-stage transmission and storage expansion model.

First-stage decisions are integer line upgrade levels ``gamma`` per branch
and, per storage site, a binary build decision ``sigma`` with continuous
power and energy ratings. The second stage dispatches generators, storage
and DC power flows for every hour of every representative day, with
penalized nodal imbalance so every investment choice stays feasible.

Everything inside the model is per-unit on the case base (power in pu,
energy in pu*h); costs are scaled so the objective is in dollars. Nodal
balance at bus ``i`` reads::

    sum(pg) + inflow - outflow + dis + shed = demand + ch + over

so ``xi = shed - over`` is the unserved energy and both parts are
penalized at the same rate. Branch flow follows ``pf = (theta_to -
theta_from) / x`` and leaves the ``from`` bus.

Storage charging and discharging are kept mutually exclusive with one
binary ``alpha`` and a continuous split ``beta`` of the power rating per
site and hour::

    eta * ch <= beta                 beta <= alpha * P_max
    dis / eta <= PR - beta           PR - beta <= (1 - alpha) * P_max
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from .grid import GridCase
from .milp import (BINARY, CONTINUOUS, EQ, INTEGER, LE, MilpModel, ModelBuilder,
                   SolveResult)
from .scenarios import ScenarioSet

log = logging.getLogger(__name__)

TEP_STORAGE = "tep_storage"
TEP_ONLY = "tep_only"
STORAGE_ONLY = "storage_only"
CONFIGS = (TEP_STORAGE, TEP_ONLY, STORAGE_ONLY)

ROUND_TOL = 1e-6


class BuildError(ValueError):
    """Inputs cannot be assembled into a planning model."""


class DecodeError(RuntimeError):
    """The solver objective disagrees with the costs rebuilt from its primal."""


@dataclass(frozen=True)
class PlanConfig:
    """Investment costs, technology limits and the model variant.

    Attributes
    ----------
    penalty : float
        Unserved and overserved energy, $/MWh.
    upgrade_levels : int
        Number of upgrade steps ``m`` offered per line.
    upgrade_fraction : float
        Added capacity per step as a fraction of the original rating.
    line_cost : float
        $/MW-km of added line capacity.
    storage_fixed : float
        $ per storage site built.
    storage_power : float
        $/MW of power rating.
    storage_energy : float
        $/MWh of energy rating.
    storage_power_max, storage_energy_max : float
        Per-site caps, MW and MWh.
    duration_cap : float
        Maximum energy-to-power ratio, hours.
    efficiency : float
        One-way charge and discharge efficiency.
    config : str
        ``tep_storage``, ``tep_only`` or ``storage_only``.
    tighten_beta : bool
        Add ``beta <= sigma * P_max``; a valid strengthening that is off by
        default.
    days_per_year : int
        Multiplier turning weighted representative days into a year.
    """

    penalty: float = 2.5e6
    upgrade_levels: int = 3
    upgrade_fraction: float = 0.30
    line_cost: float = 1243.0
    storage_fixed: float = 500_000.0
    storage_power: float = 160_000.0
    storage_energy: float = 120_000.0
    storage_power_max: float = 3000.0
    storage_energy_max: float = 3000.0
    duration_cap: float = 4.0
    efficiency: float = 0.95
    config: str = TEP_STORAGE
    tighten_beta: bool = False
    days_per_year: int = 365

    def __post_init__(self):
        if self.config not in CONFIGS:
            raise ValueError(f"config must be one of {CONFIGS}, got {self.config!r}")
        if not 0 < self.efficiency <= 1:
            raise ValueError("efficiency must lie in (0, 1]")
        if not self.duration_cap > 0:
            raise ValueError("duration cap must be positive")
        if self.upgrade_levels < 0 or int(self.upgrade_levels) != self.upgrade_levels:
            raise ValueError("upgrade_levels must be a non-negative integer")
        for name in ("penalty", "line_cost", "storage_fixed", "storage_power", "storage_energy",
                     "storage_power_max", "storage_energy_max", "upgrade_fraction"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.days_per_year <= 0:
            raise ValueError("days_per_year must be positive")

    @property
    def builds_lines(self) -> bool:
        return self.config != STORAGE_ONLY

    @property
    def builds_storage(self) -> bool:
        return self.config != TEP_ONLY

    def with_config(self, config: str) -> "PlanConfig":
        return replace(self, config=config)

    def with_storage_cost_multiplier(self, mult: float) -> "PlanConfig":
        """Scale the three storage cost coefficients by ``mult``."""
        if not mult > 0:
            raise ValueError("storage cost multiplier must be positive")
        return replace(self, storage_fixed=self.storage_fixed * mult,
                       storage_power=self.storage_power * mult,
                       storage_energy=self.storage_energy * mult)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "PlanConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown plan config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load_json(cls, path) -> "PlanConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True, eq=False)
class InvestmentState:
    """Cumulative investments: upgrade level per branch, storage per bus.

    ``power`` is in MW and ``energy`` in MWh.
    """

    gamma: np.ndarray
    sigma: np.ndarray
    power: np.ndarray
    energy: np.ndarray

    def __post_init__(self):
        g = np.array(self.gamma, dtype=np.int64)
        s = np.array(self.sigma, dtype=np.int64)
        p = np.array(self.power, dtype=float)
        e = np.array(self.energy, dtype=float)
        if not (s.shape == p.shape == e.shape):
            raise ValueError("storage arrays must share one shape")
        if (g < 0).any() or not np.isin(s, (0, 1)).all():
            raise ValueError("gamma must be >= 0 and sigma binary")
        if (p < 0).any() or (e < 0).any():
            raise ValueError("storage ratings must be non-negative")
        if ((s == 0) & ((p > ROUND_TOL) | (e > ROUND_TOL))).any():
            raise ValueError("storage ratings require sigma = 1")
        for name, arr in (("gamma", g), ("sigma", s), ("power", p), ("energy", e)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def empty(cls, case: GridCase) -> "InvestmentState":
        return cls(np.zeros(case.n_branch, dtype=np.int64), np.zeros(case.n_bus, dtype=np.int64),
                   np.zeros(case.n_bus), np.zeros(case.n_bus))

    def check(self, case: GridCase, config: PlanConfig, tol: float = 1e-3) -> None:
        if self.gamma.shape != (case.n_branch,) or self.sigma.shape != (case.n_bus,):
            raise BuildError("investment state does not match the case dimensions")
        if (self.gamma > config.upgrade_levels).any():
            raise BuildError("upgrade level above the configured maximum")
        if (self.energy > config.duration_cap * self.power + tol).any():
            raise BuildError("storage energy exceeds the duration cap")

    @property
    def storage_sites(self) -> np.ndarray:
        return np.flatnonzero(self.sigma)

    @property
    def lines_upgraded(self) -> int:
        return int((self.gamma > 0).sum())

    def to_dict(self, case: GridCase | None = None) -> dict:
        out = {"gamma": self.gamma.tolist(), "sigma": self.sigma.tolist(),
               "power_mw": self.power.tolist(), "energy_mwh": self.energy.tolist()}
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "InvestmentState":
        return cls(d["gamma"], d["sigma"], d["power_mw"], d["energy_mwh"])


@dataclass(frozen=True, eq=False)
class OperationSchedule:
    """Hourly operations, per-unit, shaped ``(k, T, n)``.

    Storage arrays cover every bus and are zero where no storage exists.
    """

    pg: np.ndarray
    theta: np.ndarray
    pf: np.ndarray
    shed: np.ndarray
    over: np.ndarray
    ch: np.ndarray
    dis: np.ndarray
    soc: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray

    @property
    def xi(self) -> np.ndarray:
        return self.shed - self.over


@dataclass(frozen=True, eq=False)
class PlanSolution:
    """Decoded plan with its cost breakdown (dollars) and energy totals (MWh/yr)."""

    investments: InvestmentState
    schedule: OperationSchedule
    capex_lines: float
    capex_storage: float
    genex: float
    penalty_cost: float
    load_shed: float
    curtailment: float
    solver: SolveResult
    storage_buses: tuple = ()
    new_investments: InvestmentState | None = None

    @property
    def capex(self) -> float:
        return self.capex_lines + self.capex_storage

    @property
    def opex(self) -> float:
        return self.genex + self.penalty_cost

    @property
    def total_cost(self) -> float:
        return self.capex + self.opex


# ---------------------------------------------------------------------------
# Cost helpers


def upgrade_step(case: GridCase, config: PlanConfig) -> np.ndarray:
    """Added rating per upgrade level for every branch, pu (0 when unrated)."""
    rating = case.arrays.rating
    return np.where(np.isfinite(rating), config.upgrade_fraction * rating, 0.0)


def line_step_cost(case: GridCase, config: PlanConfig) -> np.ndarray:
    """Dollars per upgrade level for every branch."""
    step_mw = upgrade_step(case, config) * case.base_mva
    return config.line_cost * step_mw * case.arrays.length


def storage_binary_count(n_candidates: int, k: int, T: int = 24) -> int:
    """Storage binaries for ``n_candidates`` sites: one siting plus one per hour and day."""
    return n_candidates * (1 + k * T)


def capex_of(case: GridCase, config: PlanConfig, inv: InvestmentState,
             prior: InvestmentState | None = None) -> tuple[float, float]:
    """Line and storage CapEx of ``inv`` net of ``prior``."""
    prior = prior or InvestmentState.empty(case)
    lines = float(line_step_cost(case, config) @ (inv.gamma - prior.gamma))
    storage = (config.storage_fixed * float((inv.sigma - prior.sigma).sum())
               + config.storage_power * float((inv.power - prior.power).sum())
               + config.storage_energy * float((inv.energy - prior.energy).sum()))
    return lines, storage


# ---------------------------------------------------------------------------
# Model assembly


def storage_buses(case: GridCase, config: PlanConfig, candidates, carry: InvestmentState | None):
    sites = set()
    if candidates:
        cand = {int(c) for c in candidates}
        bad = [c for c in cand if not 0 <= c < case.n_bus]
        if bad:
            raise BuildError(f"candidate buses {sorted(bad)} are not in the case")
        if config.builds_storage:
            sites |= cand
        else:
            log.warning("tep_only configuration ignores %d storage candidates", len(cand))
    if carry is not None:
        sites |= {int(i) for i in carry.storage_sites}
    return sorted(sites)


def build_model(case: GridCase, scenarios: ScenarioSet, config: PlanConfig,
                candidates=(), carry: InvestmentState | None = None,
                name: str = "tep") -> MilpModel:
    """Assemble the planning MILP.

    Parameters
    ----------
    case : GridCase
        Network, already scaled to the planning year.
    scenarios : ScenarioSet
        Built scenarios (per-unit demand and generator limits).
    config : PlanConfig
    candidates : iterable of int
        Bus indices eligible for new storage.
    carry : InvestmentState, optional
        Investments from earlier stages. They become lower bounds and their
        cost is removed through the objective constant, so the objective
        prices only new investment.
    """
    if not scenarios.built:
        raise BuildError("scenarios lack per-unit profiles; run build_scenarios first")
    k, T = scenarios.k, scenarios.T
    if scenarios.demand.shape[2] != case.n_bus or scenarios.p_max.shape[2] != case.n_gen:
        raise BuildError("scenario profiles do not match the case dimensions")
    if carry is not None:
        carry.check(case, config)
    arr = case.arrays
    base = case.base_mva
    nb, ne, ng = case.n_bus, case.n_branch, case.n_gen
    days = config.days_per_year
    w = scenarios.weights
    eta = config.efficiency
    p_cap = config.storage_power_max / base
    e_cap = config.storage_energy_max / base
    sites = storage_buses(case, config, candidates, carry)
    ns = len(sites)

    mb = ModelBuilder(name)

    # Investment columns.
    step = upgrade_step(case, config)
    step_cost = line_step_cost(case, config)
    gamma_prev = carry.gamma if carry is not None else np.zeros(ne, dtype=np.int64)
    upgradable = np.isfinite(arr.rating) & (step > 0)
    if not (config.builds_lines and config.upgrade_levels > 0):
        upgradable[:] = False
    lines = np.flatnonzero(upgradable)
    gamma = mb.add_vars([f"gamma_{e}" for e in lines], gamma_prev[lines], config.upgrade_levels,
                        INTEGER, step_cost[lines])
    if len(sites):
        sv = np.array(sites)
        prev_sigma = carry.sigma[sv] if carry is not None else np.zeros(ns)
        prev_pr = carry.power[sv] / base if carry is not None else np.zeros(ns)
        prev_er = carry.energy[sv] / base if carry is not None else np.zeros(ns)
        sigma = mb.add_vars([f"sigma_{i}" for i in sites], prev_sigma, 1.0, BINARY, config.storage_fixed)
        spr = mb.add_vars([f"spr_{i}" for i in sites], np.minimum(prev_pr, p_cap), p_cap,
                          CONTINUOUS, config.storage_power * base)
        ser = mb.add_vars([f"ser_{i}" for i in sites], np.minimum(prev_er, e_cap), e_cap,
                          CONTINUOUS, config.storage_energy * base)
    # Carried investments sit at their columns' lower bounds; netting their
    # cost out leaves only new investment in the objective.
    first_stage = mb.build()
    mb.constant = -float(first_stage.c @ first_stage.lower)

    # Operational columns, each shaped (k, T, n).
    def block(prefix, n, lower, upper, cost=0.0, vtype=CONTINUOUS):
        ents = range(n) if isinstance(n, int) else n
        idx = mb.add_vars([f"{prefix}_{j}_{s}_{t}" for s in range(k) for t in range(T) for j in ents],
                          lower, upper, vtype, cost)
        return idx.reshape(k, T, len(ents))

    wk = (days * w)[:, None, None]  # per-scenario yearly multiplier
    pg_cost = np.broadcast_to(wk * arr.cost_linear[None, None, :] * base, (k, T, ng))
    pg = block("pg", ng, scenarios.p_min.ravel(), scenarios.p_max.ravel(), pg_cost.ravel())
    mb.constant += float(days * w.sum() * T * arr.cost_fixed.sum()) if ng else 0.0
    theta_lo = np.full((k, T, nb), -math.inf)
    theta_hi = np.full((k, T, nb), math.inf)
    theta_lo[:, :, 0] = theta_hi[:, :, 0] = 0.0  # reference bus
    theta = block("th", nb, theta_lo.ravel(), theta_hi.ravel())

    # Flow bounds: angle-difference limits always; the thermal limit too
    # when the branch has no upgrade column.
    pf_lo = arr.ang_min / arr.x
    pf_hi = arr.ang_max / arr.x
    fixed_rating = arr.rating + gamma_prev * step
    no_gamma = ~upgradable
    pf_lo = np.where(no_gamma, np.maximum(pf_lo, -fixed_rating), pf_lo)
    pf_hi = np.where(no_gamma, np.minimum(pf_hi, fixed_rating), pf_hi)
    pf = block("pf", ne, np.tile(pf_lo, k * T), np.tile(pf_hi, k * T))
    pen = np.broadcast_to(wk * config.penalty * base, (k, T, nb)).ravel()
    shed = block("shed", nb, 0.0, math.inf, pen)
    over = block("over", nb, 0.0, math.inf, pen)

    if ns:
        ch = block("ch", sites, 0.0, math.inf)
        dis = block("dis", sites, 0.0, math.inf)
        soc = block("soc", sites, 0.0, e_cap)
        alpha = block("alpha", sites, 0.0, 1.0, 0.0, BINARY)
        beta = block("beta", sites, 0.0, math.inf)

    # Nodal balance.
    st_names = lambda prefix, n: [f"{prefix}_{j}_{s}_{t}" for s in range(k) for t in range(T) for j in range(n)]
    bal = mb.add_rows(st_names("bal", nb), EQ, scenarios.demand.ravel()).reshape(k, T, nb)
    if ng:
        mb.add_coeffs(bal[:, :, arr.gen_bus], pg, 1.0)
    if ne:
        mb.add_coeffs(bal[:, :, arr.t], pf, 1.0)
        mb.add_coeffs(bal[:, :, arr.f], pf, -1.0)
    mb.add_coeffs(bal, shed, 1.0)
    mb.add_coeffs(bal, over, -1.0)
    if ns:
        site_rows = bal[:, :, sites]
        mb.add_coeffs(site_rows, dis, 1.0)
        mb.add_coeffs(site_rows, ch, -1.0)

    # DC flow: pf - (theta_to - theta_from) / x = 0.
    if ne:
        ohm = mb.add_rows(st_names("ohm", ne), EQ, 0.0).reshape(k, T, ne)
        mb.add_coeffs(ohm, pf, 1.0)
        inv_x = np.broadcast_to(1.0 / arr.x, (k, T, ne))
        mb.add_coeffs(ohm, theta[:, :, arr.t], -inv_x)
        mb.add_coeffs(ohm, theta[:, :, arr.f], inv_x)

    # Upgradeable thermal limits: |pf| <= rating + step * gamma.
    if len(lines):
        nl = len(lines)
        rating = np.broadcast_to(arr.rating[lines], (k, T, nl))
        stepl = np.broadcast_to(step[lines], (k, T, nl))
        gam = np.broadcast_to(gamma, (k, T, nl))
        lname = lambda prefix: [f"{prefix}_{e}_{s}_{t}" for s in range(k) for t in range(T) for e in lines]
        up = mb.add_rows(lname("thu"), LE, rating.ravel()).reshape(k, T, nl)
        mb.add_coeffs(up, pf[:, :, lines], 1.0)
        mb.add_coeffs(up, gam, -stepl)
        lo = mb.add_rows(lname("thl"), LE, rating.ravel()).reshape(k, T, nl)
        mb.add_coeffs(lo, pf[:, :, lines], -1.0)
        mb.add_coeffs(lo, gam, -stepl)

    if ns:
        sig = np.broadcast_to(sigma, (k, T, ns))
        prv = np.broadcast_to(spr, (k, T, ns))
        erv = np.broadcast_to(ser, (k, T, ns))
        sname = lambda prefix: [f"{prefix}_{i}_{s}_{t}" for s in range(k) for t in range(T) for i in sites]

        # Siting and sizing.
        r = mb.add_rows([f"ercap_{i}" for i in sites], LE, 0.0)
        mb.add_coeffs(r, ser, 1.0)
        mb.add_coeffs(r, sigma, -e_cap)
        r = mb.add_rows([f"prcap_{i}" for i in sites], LE, 0.0)
        mb.add_coeffs(r, spr, 1.0)
        mb.add_coeffs(r, sigma, -p_cap)
        r = mb.add_rows([f"dur_{i}" for i in sites], LE, 0.0)
        mb.add_coeffs(r, ser, 1.0)
        mb.add_coeffs(r, spr, -config.duration_cap)

        # State of charge: soc_t = soc_{t-1} + eta ch_t - dis_t / eta,
        # starting from half the energy rating.
        r = mb.add_rows(sname("socdyn"), EQ, 0.0).reshape(k, T, ns)
        mb.add_coeffs(r, soc, 1.0)
        mb.add_coeffs(r, ch, -eta)
        mb.add_coeffs(r, dis, 1.0 / eta)
        if T > 1:
            mb.add_coeffs(r[:, 1:], soc[:, :-1], -1.0)
        mb.add_coeffs(r[:, 0], erv[:, 0], -0.5)
        r = mb.add_rows([f"socend_{i}_{s}" for s in range(k) for i in sites], EQ, 0.0).reshape(k, ns)
        mb.add_coeffs(r, soc[:, T - 1], 1.0)
        mb.add_coeffs(r, erv[:, 0], -0.5)
        r = mb.add_rows(sname("socer"), LE, 0.0).reshape(k, T, ns)
        mb.add_coeffs(r, soc, 1.0)
        mb.add_coeffs(r, erv, -1.0)

        # Exclusive charge/discharge.
        r = mb.add_rows(sname("chb"), LE, 0.0).reshape(k, T, ns)
        mb.add_coeffs(r, ch, eta)
        mb.add_coeffs(r, beta, -1.0)
        r = mb.add_rows(sname("disb"), LE, 0.0).reshape(k, T, ns)
        mb.add_coeffs(r, dis, 1.0 / eta)
        mb.add_coeffs(r, prv, -1.0)
        mb.add_coeffs(r, beta, 1.0)
        r = mb.add_rows(sname("betaa"), LE, 0.0).reshape(k, T, ns)
        mb.add_coeffs(r, beta, 1.0)
        mb.add_coeffs(r, alpha, -p_cap)
        r = mb.add_rows(sname("prb"), LE, p_cap).reshape(k, T, ns)
        mb.add_coeffs(r, prv, 1.0)
        mb.add_coeffs(r, beta, -1.0)
        mb.add_coeffs(r, alpha, p_cap)
        if config.tighten_beta:
            r = mb.add_rows(sname("betas"), LE, 0.0).reshape(k, T, ns)
            mb.add_coeffs(r, beta, 1.0)
            mb.add_coeffs(r, sig, -p_cap)

    model = mb.build()
    log.info("built %s: %d columns (%d binary, %d integer), %d rows", name, model.num_vars,
             model.count(BINARY), model.count(INTEGER), model.num_cons)
    return model


# ---------------------------------------------------------------------------
# Decoding


def _collect(model: MilpModel, x: np.ndarray, prefix: str, ents, k: int, T: int, width: int):
    out = np.zeros((k, T, width))
    for pos, j in enumerate(ents):
        for s in range(k):
            for t in range(T):
                out[s, t, j] = x[model.index(f"{prefix}_{j}_{s}_{t}")]
    return out


def _indexed(model: MilpModel, prefix: str) -> dict[int, int]:
    """Map entity index -> column for first-stage names like ``gamma_3``."""
    out = {}
    head = prefix + "_"
    for j, name in enumerate(model.var_names):
        if name.startswith(head):
            rest = name[len(head):]
            if rest.isdigit():
                out[int(rest)] = j
    return out


def _block(model: MilpModel, x: np.ndarray, prefix: str, ents, k: int, T: int, width: int):
    """Gather ``{prefix}_{j}_{s}_{t}`` columns into a ``(k, T, width)`` array."""
    out = np.zeros((k, T, width))
    ents = list(ents)
    if not ents:
        return out
    start = model.index(f"{prefix}_{ents[0]}_0_0")
    n = len(ents)
    cols = start + np.arange(k * T * n).reshape(k, T, n)
    # Columns are laid out contiguously (s, t, entity); verify one corner.
    if model.var_names[cols[-1, -1, -1]] != f"{prefix}_{ents[-1]}_{k - 1}_{T - 1}":
        return _collect(model, x, prefix, ents, k, T, width)
    out[:, :, ents] = x[cols]
    return out


def decode_solution(model: MilpModel, case: GridCase, scenarios: ScenarioSet,
                    config: PlanConfig, result: SolveResult, rtol: float = 1e-6) -> PlanSolution:
    """Turn a solver primal into a :class:`PlanSolution`.

    Prior investments are recovered from the first-stage lower bounds, so
    reported CapEx is incremental. Raises :class:`DecodeError` when the
    rebuilt cost differs from the solver objective by more than ``rtol``
    (relative, floor 1 dollar).
    """
    if result.primal is None or result.status not in ("optimal", "gap_limit", "time_limit"):
        raise DecodeError(f"no solution to decode (status {result.status})")
    # Solvers may return values a hair outside their bounds; projecting back
    # keeps shed, curtailment and ratings non-negative.
    x = np.clip(np.asarray(result.primal, dtype=float), model.lower, model.upper)
    k, T = scenarios.k, scenarios.T
    base = case.base_mva
    nb, ne, ng = case.n_bus, case.n_branch, case.n_gen

    gcols = _indexed(model, "gamma")
    scols = _indexed(model, "sigma")
    sites = sorted(scols)
    gamma = np.zeros(ne, dtype=np.int64)
    gamma_prev = np.zeros(ne, dtype=np.int64)
    for e, j in gcols.items():
        gamma[e] = int(round(x[j]))
        gamma_prev[e] = int(round(model.lower[j]))
    sigma = np.zeros(nb, dtype=np.int64)
    power = np.zeros(nb)
    energy = np.zeros(nb)
    prev = [np.zeros(nb, dtype=np.int64), np.zeros(nb), np.zeros(nb)]
    for i in sites:
        js, jp, je = scols[i], model.index(f"spr_{i}"), model.index(f"ser_{i}")
        sigma[i] = int(round(x[js]))
        power[i] = max(x[jp], 0.0) * base
        energy[i] = max(x[je], 0.0) * base
        prev[0][i] = int(round(model.lower[js]))
        prev[1][i] = model.lower[jp] * base
        prev[2][i] = model.lower[je] * base
    # Clear round-off ratings on unbuilt sites so the state invariants hold.
    power[sigma == 0] = 0.0
    energy[sigma == 0] = 0.0
    inv = InvestmentState(gamma, sigma, power, energy)

    sched = OperationSchedule(
        pg=_block(model, x, "pg", range(ng), k, T, ng),
        theta=_block(model, x, "th", range(nb), k, T, nb),
        pf=_block(model, x, "pf", range(ne), k, T, ne),
        shed=_block(model, x, "shed", range(nb), k, T, nb),
        over=_block(model, x, "over", range(nb), k, T, nb),
        ch=_block(model, x, "ch", sites, k, T, nb),
        dis=_block(model, x, "dis", sites, k, T, nb),
        soc=_block(model, x, "soc", sites, k, T, nb),
        alpha=_block(model, x, "alpha", sites, k, T, nb),
        beta=_block(model, x, "beta", sites, k, T, nb),
    )

    # Costs are rebuilt from the model's own cost vector for investments
    # and from first principles for operations.
    c = model.c
    capex_lines = float(sum(c[j] * (gamma[e] - gamma_prev[e]) for e, j in gcols.items()))
    # Storage CapEx uses the cleaned state, so unbuilt sites cost exactly 0.
    capex_storage = 0.0
    for i in sites:
        built = (sigma[i], power[i] / base, energy[i] / base)
        for name, v in zip((f"sigma_{i}", f"spr_{i}", f"ser_{i}"), built):
            j = model.index(name)
            capex_storage += c[j] * (v - model.lower[j])
    capex_storage = max(capex_storage, 0.0)
    arr = case.arrays
    yearly = config.days_per_year * scenarios.weights
    gen_hourly = sched.pg * arr.cost_linear[None, None, :] * base + arr.cost_fixed[None, None, :]
    genex = float(yearly @ gen_hourly.sum(axis=(1, 2)))
    imbalance = (sched.shed + sched.over).sum(axis=(1, 2))
    penalty_cost = float(config.penalty * base * (yearly @ imbalance))
    load_shed = float(base * (yearly @ sched.shed.sum(axis=(1, 2))))
    ren = arr.renewable
    curt = (scenarios.p_max[:, :, ren] - sched.pg[:, :, ren]).clip(min=0.0)
    curtailment = float(base * (yearly @ curt.sum(axis=(1, 2))))

    rebuilt = capex_lines + capex_storage + genex + penalty_cost
    # The model nets out carried CapEx by pricing first-stage columns from
    # their lower bounds, which the rebuilt investment terms mirror.
    reported = result.objective
    if abs(rebuilt - reported) > rtol * max(1.0, abs(reported)):
        raise DecodeError(f"objective {reported!r} differs from rebuilt cost {rebuilt!r}")

    # Incremental state; sigma marks every site with new storage spending,
    # whether a fresh build or an expansion of a carried site.
    add_p = np.clip(power - prev[1], 0.0, None)
    add_e = np.clip(energy - prev[2], 0.0, None)
    touched = (sigma > prev[0]) | (add_p > ROUND_TOL) | (add_e > ROUND_TOL)
    new = InvestmentState(gamma - gamma_prev, touched.astype(np.int64),
                          np.where(touched, add_p, 0.0), np.where(touched, add_e, 0.0))
    return PlanSolution(inv, sched, capex_lines, capex_storage, genex, penalty_cost,
                        load_shed, curtailment, result, tuple(sites), new)
