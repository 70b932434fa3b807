"""Solver-agnostic MILP container and an incremental builder.

A :class:`MilpModel` is a plain minimization problem::

    min  c @ x + constant
    s.t. A[i] @ x  (<=, =, >=)  rhs[i]
         lower <= x <= upper,  x[j] integral for integer/binary columns

Arrays are frozen after construction so a model can be shared between
solves (and threads) without copying.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

CONTINUOUS = "continuous"
BINARY = "binary"
INTEGER = "integer"
VAR_TYPES = (CONTINUOUS, BINARY, INTEGER)

LE, EQ, GE = "<=", "=", ">="
SENSES = (LE, EQ, GE)


class ModelError(ValueError):
    """Raised when a model violates its structural invariants."""


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MilpModel:
    """Immutable MILP in row form (always a minimization)."""

    var_names: tuple[str, ...]
    lower: np.ndarray
    upper: np.ndarray
    var_types: tuple[str, ...]
    con_names: tuple[str, ...]
    A: sp.csr_matrix
    senses: tuple[str, ...]
    rhs: np.ndarray
    c: np.ndarray
    constant: float = 0.0
    name: str = "model"
    _index: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        n, m = len(self.var_names), len(self.con_names)
        lower = _freeze(np.asarray(self.lower, dtype=float).copy())
        upper = _freeze(np.asarray(self.upper, dtype=float).copy())
        rhs = _freeze(np.asarray(self.rhs, dtype=float).copy())
        c = _freeze(np.asarray(self.c, dtype=float).copy())
        A = sp.csr_matrix(self.A, shape=(m, n), dtype=float, copy=True)
        A.sum_duplicates()
        A.eliminate_zeros()
        A.sort_indices()
        for arr in (A.data, A.indices, A.indptr):
            arr.setflags(write=False)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "rhs", rhs)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "var_names", tuple(self.var_names))
        object.__setattr__(self, "con_names", tuple(self.con_names))
        object.__setattr__(self, "var_types", tuple(self.var_types))
        object.__setattr__(self, "senses", tuple(self.senses))
        object.__setattr__(self, "constant", float(self.constant))
        self._validate()
        index = {name: j for j, name in enumerate(self.var_names)}
        object.__setattr__(self, "_index", index)

    def _validate(self):
        n, m = self.num_vars, self.num_cons
        if not (len(self.lower) == len(self.upper) == len(self.var_types) == len(self.c) == n):
            raise ModelError("variable arrays have inconsistent lengths")
        if not (len(self.senses) == len(self.rhs) == m):
            raise ModelError("constraint arrays have inconsistent lengths")
        if len(set(self.var_names)) != n:
            raise ModelError("variable names are not unique")
        if len(set(self.con_names)) != m:
            raise ModelError("constraint names are not unique")
        for name in self.var_names + self.con_names:
            if not name or any(ch.isspace() for ch in name):
                raise ModelError(f"invalid name {name!r}")
        if np.isnan(self.lower).any() or np.isnan(self.upper).any():
            raise ModelError("NaN variable bound")
        if not (np.isfinite(self.A.data).all() and np.isfinite(self.c).all()
                and np.isfinite(self.rhs).all() and math.isfinite(self.constant)):
            raise ModelError("non-finite coefficient")
        if (self.lower > self.upper).any():
            j = int(np.flatnonzero(self.lower > self.upper)[0])
            raise ModelError(f"empty domain for {self.var_names[j]}")
        for j, t in enumerate(self.var_types):
            if t not in VAR_TYPES:
                raise ModelError(f"unknown variable type {t!r}")
            if t == BINARY and (self.lower[j] < 0 or self.upper[j] > 1):
                raise ModelError(f"binary {self.var_names[j]} has bounds outside [0, 1]")
        for s in self.senses:
            if s not in SENSES:
                raise ModelError(f"unknown constraint sense {s!r}")

    @property
    def num_vars(self) -> int:
        return len(self.var_names)

    @property
    def num_cons(self) -> int:
        return len(self.con_names)

    @property
    def integer_mask(self) -> np.ndarray:
        return np.array([t != CONTINUOUS for t in self.var_types], dtype=bool)

    def count(self, var_type: str) -> int:
        return sum(1 for t in self.var_types if t == var_type)

    def index(self, name: str) -> int:
        return self._index[name]

    def objective_value(self, x) -> float:
        return float(self.c @ np.asarray(x, dtype=float)) + self.constant

    def with_bounds(self, lower=None, upper=None) -> "MilpModel":
        """Copy of the model with replaced variable bounds."""
        return MilpModel(
            self.var_names,
            self.lower if lower is None else lower,
            self.upper if upper is None else upper,
            self.var_types, self.con_names, self.A, self.senses,
            self.rhs, self.c, self.constant, self.name,
        )

    def relaxed(self) -> "MilpModel":
        """LP relaxation (all columns continuous)."""
        return MilpModel(
            self.var_names, self.lower, self.upper,
            (CONTINUOUS,) * self.num_vars, self.con_names, self.A,
            self.senses, self.rhs, self.c, self.constant, self.name,
        )

    def same_as(self, other: "MilpModel") -> bool:
        """Exact (bitwise) structural equality, ignoring the model name."""
        if (self.var_names != other.var_names or self.con_names != other.con_names
                or self.var_types != other.var_types or self.senses != other.senses):
            return False
        arrays = [(self.lower, other.lower), (self.upper, other.upper),
                  (self.rhs, other.rhs), (self.c, other.c)]
        if not all(np.array_equal(a, b) for a, b in arrays):
            return False
        if self.constant != other.constant:
            return False
        return (self.A != other.A).nnz == 0


class ModelBuilder:
    """Accumulates columns and rows, then emits a :class:`MilpModel`.

    Variables are added in blocks so large models assemble with numpy
    rather than per-element Python calls.
    """

    def __init__(self, name: str = "model"):
        self.name = name
        self._names: list[str] = []
        self._lower: list[np.ndarray] = []
        self._upper: list[np.ndarray] = []
        self._types: list[str] = []
        self._cost: list[np.ndarray] = []
        self._con_names: list[str] = []
        self._senses: list[str] = []
        self._rhs: list[float] = []
        self._rows: list[np.ndarray] = []
        self._cols: list[np.ndarray] = []
        self._vals: list[np.ndarray] = []
        self.constant = 0.0

    @property
    def num_vars(self) -> int:
        return len(self._names)

    @property
    def num_cons(self) -> int:
        return len(self._con_names)

    def add_vars(self, names, lower=0.0, upper=math.inf, var_type=CONTINUOUS, cost=0.0) -> np.ndarray:
        """Append a block of columns; returns their indices."""
        names = list(names)
        k = len(names)
        start = len(self._names)
        self._names.extend(names)
        self._lower.append(np.broadcast_to(np.asarray(lower, dtype=float), (k,)).copy())
        self._upper.append(np.broadcast_to(np.asarray(upper, dtype=float), (k,)).copy())
        self._cost.append(np.broadcast_to(np.asarray(cost, dtype=float), (k,)).copy())
        self._types.extend([var_type] * k)
        return np.arange(start, start + k)

    def add_var(self, name, lower=0.0, upper=math.inf, var_type=CONTINUOUS, cost=0.0) -> int:
        return int(self.add_vars([name], lower, upper, var_type, cost)[0])

    def add_con(self, name: str, cols, vals, sense: str, rhs: float) -> int:
        i = len(self._con_names)
        cols = np.asarray(cols, dtype=np.int64)
        self._con_names.append(name)
        self._senses.append(sense)
        self._rhs.append(float(rhs))
        self._rows.append(np.full(len(cols), i, dtype=np.int64))
        self._cols.append(cols)
        self._vals.append(np.broadcast_to(np.asarray(vals, dtype=float), cols.shape).copy())
        return i

    def add_cons(self, names, entries, sense: str, rhs) -> np.ndarray:
        """Append a block of rows sharing one sense.

        ``entries`` is a sequence of ``(cols, vals)`` pairs of equal-length
        arrays; entry ``k`` contributes ``vals[r] * x[cols[r]]`` to row ``r``.
        """
        names = list(names)
        k = len(names)
        start = len(self._con_names)
        rows = np.arange(start, start + k)
        self._con_names.extend(names)
        self._senses.extend([sense] * k)
        self._rhs.extend(np.broadcast_to(np.asarray(rhs, dtype=float), (k,)).tolist())
        for cols, vals in entries:
            cols = np.asarray(cols, dtype=np.int64)
            self._rows.append(rows)
            self._cols.append(cols)
            self._vals.append(np.broadcast_to(np.asarray(vals, dtype=float), (k,)).copy())
        return rows

    def add_rows(self, names, sense: str, rhs) -> np.ndarray:
        """Append empty rows; fill them with :meth:`add_coeffs`."""
        return self.add_cons(names, (), sense, rhs)

    def add_coeffs(self, rows, cols, vals):
        """Add coefficients ``vals[k]`` at ``(rows[k], cols[k])``; repeats accumulate."""
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        self._rows.append(rows)
        self._cols.append(cols)
        self._vals.append(np.broadcast_to(np.asarray(vals, dtype=float).ravel()
                                          if np.ndim(vals) else float(vals), rows.shape).copy())

    def add_cost(self, cols, vals):
        cols = np.atleast_1d(np.asarray(cols, dtype=np.int64))
        vals = np.broadcast_to(np.asarray(vals, dtype=float), cols.shape)
        c = self._flat(self._cost)
        np.add.at(c, cols, vals)
        self._cost = [c]

    @staticmethod
    def _flat(parts):
        return np.concatenate(parts) if parts else np.zeros(0)

    def build(self) -> MilpModel:
        n, m = len(self._names), len(self._con_names)
        if self._rows:
            rows = np.concatenate(self._rows)
            cols = np.concatenate(self._cols)
            vals = np.concatenate(self._vals)
        else:
            rows = cols = np.zeros(0, dtype=np.int64)
            vals = np.zeros(0)
        A = sp.coo_matrix((vals, (rows, cols)), shape=(m, n)).tocsr()
        return MilpModel(
            var_names=tuple(self._names),
            lower=self._flat(self._lower),
            upper=self._flat(self._upper),
            var_types=tuple(self._types),
            con_names=tuple(self._con_names),
            A=A,
            senses=tuple(self._senses),
            rhs=np.asarray(self._rhs, dtype=float),
            c=self._flat(self._cost),
            constant=self.constant,
            name=self.name,
        )


def check_solution(model: MilpModel, x, feas_tol: float = 1e-6, int_tol: float = 1e-6) -> list[str]:
    """Return a list of violations of ``x`` against ``model``.

    Rows are evaluated one at a time from the CSR arrays with plain Python
    arithmetic, independently of any solver's internal bookkeeping.
    """
    x = [float(v) for v in x]
    problems = []
    if len(x) != model.num_vars:
        return [f"expected {model.num_vars} values, got {len(x)}"]
    for j, v in enumerate(x):
        name = model.var_names[j]
        if v < model.lower[j] - feas_tol or v > model.upper[j] + feas_tol:
            problems.append(f"{name}={v} outside [{model.lower[j]}, {model.upper[j]}]")
        if model.var_types[j] != CONTINUOUS and abs(v - round(v)) > int_tol:
            problems.append(f"{name}={v} not integral")
    indptr, indices, data = model.A.indptr, model.A.indices, model.A.data
    for i in range(model.num_cons):
        act = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            act += data[k] * x[indices[k]]
        rhs, sense = model.rhs[i], model.senses[i]
        if sense == LE and act > rhs + feas_tol:
            problems.append(f"{model.con_names[i]}: {act} > {rhs}")
        elif sense == GE and act < rhs - feas_tol:
            problems.append(f"{model.con_names[i]}: {act} < {rhs}")
        elif sense == EQ and abs(act - rhs) > feas_tol:
            problems.append(f"{model.con_names[i]}: {act} != {rhs}")
    return problems
