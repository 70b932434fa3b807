"""LP-based branch-and-bound for :class:`~tepstore.milp.model.MilpModel`.

Node selection is best-bound; branching picks the most fractional integer
column (lowest index on ties). Children inherit the parent's optimal basis
and re-enter the simplex through its phase 1, so a node usually costs a
handful of pivots.
"""

from __future__ import annotations

import heapq
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import simplex
from .model import MilpModel, check_solution

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
GAP_LIMIT = "gap_limit"
TIME_LIMIT = "time_limit"
STATUSES = (OPTIMAL, INFEASIBLE, UNBOUNDED, GAP_LIMIT, TIME_LIMIT)

ROUNDING_EVERY = 16  # nodes between rounding-heuristic attempts


@dataclass(frozen=True)
class SolveOptions:
    """Solver knobs. ``mip_gap`` is relative; the feasibility and
    integrality tolerances are absolute."""

    mip_gap: float = 0.01
    time_limit: float = math.inf
    feas_tol: float = 1e-6
    int_tol: float = 1e-6
    node_limit: int | None = None
    seed: int | None = None


@dataclass
class SolveResult:
    status: str
    objective: float
    primal: np.ndarray | None
    bound: float
    gap: float
    nodes: int = 0
    iterations: int = 0
    wall_time: float = field(default=0.0, compare=False)

    @property
    def has_solution(self) -> bool:
        return self.primal is not None

    def value(self, model: MilpModel, name: str) -> float:
        return float(self.primal[model.index(name)])


def relative_gap(incumbent: float, bound: float) -> float:
    if not math.isfinite(incumbent):
        return math.inf
    return max(0.0, incumbent - bound) / max(1.0, abs(incumbent))


@dataclass(order=True)
class _Node:
    bound: float
    key: float
    seq: int
    lower: np.ndarray = field(compare=False)
    upper: np.ndarray = field(compare=False)
    basis: simplex.Basis | None = field(compare=False, default=None)


def solve(model: MilpModel, options: SolveOptions | None = None) -> SolveResult:
    """Solve ``model`` to within ``options.mip_gap``.

    Infeasibility and unboundedness are reported through ``status``.
    Any returned primal passes :func:`check_solution` at the configured
    tolerances.
    """
    opts = options or SolveOptions()
    start = time.monotonic()
    deadline = start + opts.time_limit if math.isfinite(opts.time_limit) else None
    engine = simplex.BoundedSimplex(model.A, model.senses, model.rhs, model.c)
    int_cols = np.flatnonzero(model.integer_mask)
    rng = np.random.default_rng(opts.seed) if opts.seed is not None else None

    root_lo = model.lower.copy()
    root_hi = model.upper.copy()
    # Integer columns only take integral values, so round their bounds inward.
    root_lo[int_cols] = np.ceil(root_lo[int_cols] - opts.int_tol)
    root_hi[int_cols] = np.floor(root_hi[int_cols] + opts.int_tol)

    incumbent_x = None
    incumbent = math.inf
    nodes = 0
    iterations = 0
    seq = 0
    heap: list[_Node] = [_Node(-math.inf, 0.0, 0, root_lo, root_hi)]

    def finish(status, bound):
        obj = incumbent + model.constant if incumbent_x is not None else math.nan
        bnd = bound + model.constant if math.isfinite(bound) else bound
        if incumbent_x is not None:
            gap = relative_gap(obj, bnd)
        else:
            gap = math.inf
        return SolveResult(status, obj, incumbent_x, bnd, gap, nodes, iterations,
                           time.monotonic() - start)

    while heap:
        # Open nodes whose bound exceeds the incumbent are prunable, so the
        # incumbent itself caps the global bound.
        best_bound = min(heap[0].bound, incumbent)
        if incumbent_x is not None:
            gap = relative_gap(incumbent + model.constant, best_bound + model.constant)
            if gap <= opts.mip_gap:
                return finish(GAP_LIMIT if gap > 0 else OPTIMAL, best_bound)
        if deadline is not None and time.monotonic() > deadline:
            return finish(TIME_LIMIT, best_bound)
        if opts.node_limit is not None and nodes >= opts.node_limit:
            return finish(TIME_LIMIT, best_bound)

        node = heapq.heappop(heap)
        if node.bound >= incumbent - _prune_tol(incumbent):
            continue
        nodes += 1
        res = engine.solve(node.lower, node.upper, basis=node.basis, deadline=deadline)
        iterations += res.iterations
        if res.status == simplex.TIME_LIMIT:
            heapq.heappush(heap, node)
            return finish(TIME_LIMIT, min(min(n.bound for n in heap), incumbent))
        if res.status == simplex.UNBOUNDED:
            if nodes == 1:
                return SolveResult(UNBOUNDED, -math.inf, None, -math.inf, math.inf, nodes,
                                   iterations, time.monotonic() - start)
            continue
        if res.status == simplex.ITERATION_LIMIT:
            raise RuntimeError("simplex iteration limit reached")
        if res.status == simplex.INFEASIBLE:
            continue
        obj = res.objective
        if obj >= incumbent - _prune_tol(incumbent):
            continue
        x = res.x
        frac_col = _most_fractional(x, int_cols, opts.int_tol)
        if frac_col is None:
            polished = _polish(engine, model, node, x, int_cols, res.basis, deadline, opts)
            if polished is not None:
                px, pobj = polished
                if pobj < incumbent:
                    incumbent, incumbent_x = pobj, px
                    log.debug("incumbent %.10g at node %d", pobj + model.constant, nodes)
            continue
        if nodes == 1 or nodes % ROUNDING_EVERY == 0:
            # Rounding heuristic: fix integers at their rounded LP values.
            rounded = _polish(engine, model, node, x, int_cols, res.basis, deadline, opts)
            if rounded is not None and rounded[1] < incumbent:
                incumbent, incumbent_x = rounded[1], rounded[0]
                log.debug("rounding incumbent %.10g at node %d", incumbent + model.constant, nodes)
        value = x[frac_col]
        down_hi = node.upper.copy()
        down_hi[frac_col] = math.floor(value)
        up_lo = node.lower.copy()
        up_lo[frac_col] = math.ceil(value)
        for lo, hi in ((node.lower, down_hi), (up_lo, node.upper)):
            seq += 1
            key = float(rng.random()) if rng is not None else 0.0
            heapq.heappush(heap, _Node(obj, key, seq, lo, hi, res.basis))

    if incumbent_x is None:
        return SolveResult(INFEASIBLE, math.nan, None, math.inf, math.inf, nodes,
                           iterations, time.monotonic() - start)
    return finish(OPTIMAL, incumbent)


def _prune_tol(incumbent: float) -> float:
    if not math.isfinite(incumbent):
        return 0.0
    return 1e-9 * max(1.0, abs(incumbent))


def _most_fractional(x, int_cols, int_tol):
    if int_cols.size == 0:
        return None
    vals = x[int_cols]
    frac = np.abs(vals - np.round(vals))
    k = int(np.argmax(frac))  # argmax returns the lowest index among ties
    if frac[k] <= int_tol:
        return None
    return int(int_cols[k])


def _polish(engine, model, node, x, int_cols, basis, deadline, opts):
    """Fix integer columns at their rounded values and re-solve the LP.

    On an integral LP point this removes the integrality slack the LP
    tolerated, so the incumbent meets the row tolerances exactly. On a
    fractional point it acts as a rounding heuristic. Returns ``None`` when
    the fixed LP is infeasible.
    """
    if int_cols.size == 0:
        return x, float(model.c @ x)
    lo, hi = node.lower.copy(), node.upper.copy()
    rounded = np.clip(np.round(x[int_cols]), lo[int_cols], hi[int_cols])
    lo[int_cols] = rounded
    hi[int_cols] = rounded
    res = engine.solve(lo, hi, basis=basis, deadline=deadline)
    if res.status != simplex.OPTIMAL:
        return None
    px = res.x.copy()
    px[int_cols] = rounded
    if check_solution(model, px, opts.feas_tol, opts.int_tol):
        return None
    return px, float(model.c @ px)

