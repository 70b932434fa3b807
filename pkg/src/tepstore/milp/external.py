"""Adapter for solvers run as separate processes.

Contract: the command is invoked as ``<cmd> <model.mps> <solution.out>``.
The solution file holds the status on line 1, the objective on line 2, then
one ``name value`` pair per line for every column.
"""

from __future__ import annotations

import math
import shlex
import subprocess
import tempfile
import time
from pathlib import Path

import numpy as np

from .bnb import GAP_LIMIT, INFEASIBLE, OPTIMAL, STATUSES, TIME_LIMIT, UNBOUNDED, SolveResult
from .model import MilpModel
from .mps import write_mps


class ExternalSolverError(RuntimeError):
    """The external process failed or produced output we cannot read."""

    def __init__(self, msg: str, raw: str = ""):
        super().__init__(f"{msg}\n--- raw output ---\n{raw}" if raw else msg)
        self.raw = raw


def solve_external(model: MilpModel, solver_command: str, timeout: float | None = None) -> SolveResult:
    start = time.monotonic()
    with tempfile.TemporaryDirectory(prefix="tepstore-") as tmp:
        mps_path = Path(tmp) / "model.mps"
        sol_path = Path(tmp) / "solution.out"
        write_mps(model, mps_path)
        cmd = shlex.split(solver_command) + [str(mps_path), str(sol_path)]
        try:
            proc = subprocess.run(cmd, capture_output=True, text=True, timeout=timeout)
        except FileNotFoundError as exc:
            raise ExternalSolverError(f"cannot run {cmd[0]!r}: {exc}") from exc
        except subprocess.TimeoutExpired as exc:
            raise ExternalSolverError(f"solver exceeded {timeout} s", str(exc.stdout or "")) from exc
        raw = proc.stdout + proc.stderr
        if proc.returncode != 0:
            raise ExternalSolverError(f"solver exited with status {proc.returncode}", raw)
        if not sol_path.exists():
            raise ExternalSolverError("solver wrote no solution file", raw)
        text = sol_path.read_text()
    result = parse_solution(text, model)
    result.wall_time = time.monotonic() - start
    return result


def parse_solution(text: str, model: MilpModel) -> SolveResult:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ExternalSolverError("empty solution file", text)
    status = lines[0].lower()
    if status not in STATUSES:
        raise ExternalSolverError(f"unknown status {lines[0]!r}", text)
    if status in (INFEASIBLE, UNBOUNDED):
        obj = -math.inf if status == UNBOUNDED else math.nan
        return SolveResult(status, obj, None, obj, math.inf)
    if len(lines) < 2:
        raise ExternalSolverError("missing objective line", text)
    try:
        objective = float(lines[1])
    except ValueError:
        raise ExternalSolverError(f"bad objective {lines[1]!r}", text) from None
    values = {}
    for ln in lines[2:]:
        parts = ln.split()
        if len(parts) != 2:
            raise ExternalSolverError(f"bad value line {ln!r}", text)
        try:
            values[parts[0]] = float(parts[1])
        except ValueError:
            raise ExternalSolverError(f"bad value line {ln!r}", text) from None
    if status == TIME_LIMIT and not values:
        return SolveResult(status, math.nan, None, -math.inf, math.inf)
    missing = [nm for nm in model.var_names if nm not in values]
    if missing:
        raise ExternalSolverError(f"{len(missing)} columns missing, e.g. {missing[0]!r}", text)
    primal = np.array([values[nm] for nm in model.var_names])
    gap = 0.0 if status == OPTIMAL else math.nan if status == GAP_LIMIT else math.inf
    return SolveResult(status, objective, primal, objective, gap)
