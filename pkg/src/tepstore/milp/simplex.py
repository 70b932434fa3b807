"""Bounded-variable primal simplex.

Rows are turned into equalities with one bounded logical column each::

    A x + s = b,   s in [0, inf) for <=,  (-inf, 0] for >=,  [0, 0] for =

Every column keeps its own bounds, so nonbasic columns sit at a bound (or at
zero when free) and bound flips replace pivots where possible. Phase 1
minimizes the sum of bound violations of the basic columns starting from any
basis, which lets branch-and-bound reuse a parent's basis after a bound
change. The basis is held as a sparse LU factorization plus a product-form
eta file that is refreshed periodically.

Pricing is Dantzig (largest reduced cost); after a run of degenerate pivots
the engine falls back to Bland's rule until progress resumes, which rules
out cycling.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .model import EQ, GE, LE

BASIC, AT_LOWER, AT_UPPER, FREE_ZERO = 0, 1, 2, 3

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"
TIME_LIMIT = "time_limit"


class SingularBasis(RuntimeError):
    pass


@dataclass
class Basis:
    head: np.ndarray    # column index of the basic variable in each row slot
    status: np.ndarray  # per column: BASIC / AT_LOWER / AT_UPPER / FREE_ZERO


@dataclass
class LPResult:
    status: str
    x: np.ndarray | None
    objective: float
    basis: Basis | None
    iterations: int


class _Factor:
    """LU of the basis matrix plus product-form updates."""

    def __init__(self, B: sp.csc_matrix):
        try:
            self.lu = splu(B, permc_spec="COLAMD")
        except RuntimeError as exc:  # exactly singular
            raise SingularBasis(str(exc)) from exc
        self.etas: list[tuple[int, np.ndarray]] = []

    def ftran(self, a: np.ndarray) -> np.ndarray:
        w = self.lu.solve(a)
        for r, eta in self.etas:
            wr = w[r]
            if wr != 0.0:
                w += eta * wr
        return w

    def btran(self, v: np.ndarray) -> np.ndarray:
        v = v.copy()
        for r, eta in reversed(self.etas):
            v[r] += v @ eta
        return self.lu.solve(v, trans="T")

    def update(self, r: int, w: np.ndarray):
        pivot = w[r]
        eta = -w / pivot
        eta[r] = 1.0 / pivot - 1.0
        self.etas.append((r, eta))


class BoundedSimplex:
    """Reusable LP engine for one constraint matrix.

    Variable bounds are supplied per solve so the same engine serves every
    node of a branch-and-bound tree.
    """

    def __init__(self, A, senses, rhs, c, *, primal_tol=1e-9, dual_tol=1e-9,
                 pivot_tol=1e-9, refactor_every=64, stall_limit=50):
        A = sp.csr_matrix(A, dtype=float)
        m, n = A.shape
        self.m, self.n = m, n
        self.N = n + m
        self.full = sp.hstack([A, sp.identity(m, format="csr")], format="csc")
        self.full.sort_indices()
        self.full_T = self.full.T.tocsr()
        self.b = np.asarray(rhs, dtype=float)
        slack_lo = np.zeros(m)
        slack_hi = np.zeros(m)
        for i, s in enumerate(senses):
            if s == LE:
                slack_hi[i] = math.inf
            elif s == GE:
                slack_lo[i] = -math.inf
            elif s != EQ:
                raise ValueError(f"bad sense {s!r}")
        self.slack_lo, self.slack_hi = slack_lo, slack_hi
        c = np.asarray(c, dtype=float)
        self.c_orig = c
        scale = float(np.abs(c).max()) if c.size else 0.0
        self.cost = np.concatenate([c / scale if scale > 0 else c, np.zeros(m)])
        self.primal_tol = primal_tol
        self.dual_tol = dual_tol
        self.pivot_tol = pivot_tol
        self.refactor_every = refactor_every
        self.stall_limit = stall_limit

    def _column(self, j: int) -> np.ndarray:
        a = np.zeros(self.m)
        lo, hi = self.full.indptr[j], self.full.indptr[j + 1]
        a[self.full.indices[lo:hi]] = self.full.data[lo:hi]
        return a

    def _factor(self, head) -> _Factor:
        return _Factor(self.full[:, head].tocsc())

    def _initial_basis(self, lb, ub, basis: Basis | None):
        m, n = self.m, self.n
        if basis is None:
            head = np.arange(n, n + m)
            status = np.empty(self.N, dtype=np.int8)
            status[n:] = BASIC
            status[:n] = AT_LOWER
        else:
            head = basis.head.copy()
            status = basis.status.copy()
        # Park each nonbasic column on a finite bound when it has one.
        lo_fin, hi_fin = np.isfinite(lb), np.isfinite(ub)
        nb = status != BASIC
        want_lower = nb & (status != AT_UPPER)
        want_upper = nb & (status == AT_UPPER)
        st = status.copy()
        st[want_lower & lo_fin] = AT_LOWER
        st[want_lower & ~lo_fin & hi_fin] = AT_UPPER
        st[want_upper & hi_fin] = AT_UPPER
        st[want_upper & ~hi_fin & lo_fin] = AT_LOWER
        st[nb & ~lo_fin & ~hi_fin] = FREE_ZERO
        return head, st

    def solve(self, lower, upper, basis: Basis | None = None, deadline: float | None = None,
              max_iter: int | None = None) -> LPResult:
        m, n, N = self.m, self.n, self.N
        lb = np.concatenate([np.asarray(lower, dtype=float), self.slack_lo])
        ub = np.concatenate([np.asarray(upper, dtype=float), self.slack_hi])
        if (lb > ub).any():
            return LPResult(INFEASIBLE, None, math.nan, None, 0)
        head, status = self._initial_basis(lb, ub, basis)
        try:
            factor = self._factor(head)
        except SingularBasis:
            if basis is None:
                raise
            head, status = self._initial_basis(lb, ub, None)
            factor = self._factor(head)

        x = np.zeros(N)
        x[status == AT_LOWER] = lb[status == AT_LOWER]
        x[status == AT_UPPER] = ub[status == AT_UPPER]

        def recompute_basics():
            x[head] = 0.0
            x[head] = factor.ftran(self.b - self.full @ x)

        recompute_basics()
        fixed = lb == ub
        ptol, dtol = self.primal_tol, self.dual_tol
        limit = max_iter if max_iter is not None else 50 * (m + N) + 1000
        degenerate_run = 0
        bland = False
        it = 0
        while True:
            if it >= limit:
                return LPResult(ITERATION_LIMIT, None, math.nan, None, it)
            if deadline is not None and it % 32 == 0 and time.monotonic() > deadline:
                return LPResult(TIME_LIMIT, None, math.nan, None, it)
            xb, lbb, ubb = x[head], lb[head], ub[head]
            below = xb < lbb - ptol
            above = xb > ubb + ptol
            phase1 = bool(below.any() or above.any())
            if phase1:
                cb = above.astype(float) - below.astype(float)
                y = factor.btran(cb)
                d = -(self.full_T @ y)
            else:
                y = factor.btran(self.cost[head])
                d = self.cost - self.full_T @ y
            d[head] = 0.0
            d[fixed] = 0.0
            eligible = (((status == AT_LOWER) & (d < -dtol))
                        | ((status == AT_UPPER) & (d > dtol))
                        | ((status == FREE_ZERO) & (np.abs(d) > dtol)))
            cand = np.flatnonzero(eligible)
            if cand.size == 0:
                if phase1:
                    return LPResult(INFEASIBLE, None, math.nan, None, it)
                xs = x[:n].copy()
                obj = float(self.c_orig @ xs)
                return LPResult(OPTIMAL, xs, obj, Basis(head.copy(), status.copy()), it)
            if bland:
                q = int(cand[0])
            else:
                q = int(cand[np.argmax(np.abs(d[cand]))])
            direction = 1.0 if d[q] < 0 else -1.0
            w = factor.ftran(self._column(q))
            delta = -direction * w  # change in basic values per unit step

            ratio = np.full(m, math.inf)
            to_upper = np.zeros(m, dtype=bool)
            feas = ~(below | above)
            dec = delta < -self.pivot_tol
            inc = delta > self.pivot_tol
            sel = feas & dec
            ratio[sel] = (xb[sel] - lbb[sel]) / -delta[sel]
            sel = feas & inc
            ratio[sel] = (ubb[sel] - xb[sel]) / delta[sel]
            to_upper[sel] = True
            sel = below & inc
            ratio[sel] = (lbb[sel] - xb[sel]) / delta[sel]
            sel = above & dec
            ratio[sel] = (xb[sel] - ubb[sel]) / -delta[sel]
            to_upper[sel] = True
            np.maximum(ratio, 0.0, out=ratio)

            theta = float(ratio.min()) if m else math.inf
            span = ub[q] - lb[q]
            if span <= theta:
                if not math.isfinite(span):
                    return LPResult(UNBOUNDED, None, -math.inf, None, it)
                # Bound flip: the entering column crosses to its other bound.
                x[head] += span * delta
                if status[q] == AT_LOWER:
                    status[q], x[q] = AT_UPPER, ub[q]
                else:
                    status[q], x[q] = AT_LOWER, lb[q]
                degenerate_run = 0
                bland = False
                it += 1
                continue
            if not math.isfinite(theta):
                return LPResult(UNBOUNDED, None, -math.inf, None, it)

            ties = np.flatnonzero(ratio <= theta + 1e-12)
            if bland:
                r = int(ties[np.argmin(head[ties])])
            else:
                r = int(ties[np.argmax(np.abs(delta[ties]))])
            leaving = int(head[r])
            x[head] += theta * delta
            x[q] += direction * theta
            if to_upper[r]:
                status[leaving], x[leaving] = AT_UPPER, ub[leaving]
            else:
                status[leaving], x[leaving] = AT_LOWER, lb[leaving]
            if not math.isfinite(x[leaving]):
                status[leaving], x[leaving] = FREE_ZERO, 0.0
            head[r] = q
            status[q] = BASIC

            if theta <= 1e-12:
                degenerate_run += 1
                if degenerate_run > self.stall_limit:
                    bland = True
            else:
                degenerate_run = 0
                bland = False

            factor.update(r, w)
            if len(factor.etas) >= self.refactor_every:
                factor = self._factor(head)
                recompute_basics()
            it += 1


def solve_lp(model, lower=None, upper=None, **kwargs) -> LPResult:
    """Solve the LP relaxation of ``model`` (convenience wrapper)."""
    engine = BoundedSimplex(model.A, model.senses, model.rhs, model.c)
    res = engine.solve(model.lower if lower is None else lower,
                       model.upper if upper is None else upper, **kwargs)
    if res.status == OPTIMAL:
        res.objective += model.constant
    return res
