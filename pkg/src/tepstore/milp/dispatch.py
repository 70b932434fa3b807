"""Choose between the built-in solver and an external one by model size."""

from __future__ import annotations

import importlib.util
import logging
import math
import shlex
import sys
from dataclasses import dataclass, field, replace

from .bnb import SolveOptions, SolveResult, solve
from .external import solve_external
from .model import BINARY, INTEGER, MilpModel

log = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 1500  # columns; larger models go to the external solver


def highs_command(options: SolveOptions) -> str | None:
    """Command line for the bundled HiGHS runner, or ``None`` without highspy."""
    if importlib.util.find_spec("highspy") is None:
        return None
    parts = [sys.executable, "-m", "tepstore.milp.highs_runner", "--mip-gap", repr(options.mip_gap)]
    if math.isfinite(options.time_limit):
        parts += ["--time-limit", repr(options.time_limit)]
    return shlex.join(parts)


@dataclass(frozen=True)
class SolverSettings:
    """Solver options plus the routing rule.

    Models with more than ``threshold`` columns are sent to ``external``
    (by default the bundled HiGHS runner when highspy is installed); the
    rest use the built-in branch-and-bound.
    """

    options: SolveOptions = field(default_factory=SolveOptions)
    external: str | None = None
    threshold: int = DEFAULT_THRESHOLD

    def with_options(self, **kw) -> "SolverSettings":
        return replace(self, options=replace(self.options, **kw))

    def external_command(self) -> str | None:
        return self.external or highs_command(self.options)

    def solve(self, model: MilpModel) -> SolveResult:
        cmd = self.external_command() if model.num_vars > self.threshold else None
        log.info("solving %s: %d columns, %d binary, %d integer, %s", model.name, model.num_vars,
                 model.count(BINARY), model.count(INTEGER), "external" if cmd else "internal")
        if cmd:
            timeout = None
            if math.isfinite(self.options.time_limit):
                timeout = self.options.time_limit + 60.0
            result = solve_external(model, cmd, timeout=timeout)
        else:
            if model.num_vars > self.threshold:
                log.warning("no external solver available; solving %d columns internally",
                            model.num_vars)
            result = solve(model, self.options)
        log.info("%s: %s objective %.6g in %.2f s", model.name, result.status,
                 result.objective, result.wall_time)
        return result
