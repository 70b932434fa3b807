"""Solve an MPS file with HiGHS and write a solution file.

Usage: ``python -m tepstore.milp.highs_runner [--mip-gap G] [--time-limit S] model.mps solution.out``

This is the reference executable for :func:`tepstore.milp.external.solve_external`;
it reads the MPS file with HiGHS's own parser.
"""

from __future__ import annotations

import argparse
import sys

import highspy


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="tepstore-highs")
    ap.add_argument("model")
    ap.add_argument("solution")
    ap.add_argument("--mip-gap", type=float, default=1e-4)
    ap.add_argument("--time-limit", type=float, default=None)
    args = ap.parse_args(argv)

    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("threads", 1)
    h.setOptionValue("random_seed", 0)
    h.setOptionValue("mip_rel_gap", args.mip_gap)
    if args.time_limit is not None:
        h.setOptionValue("time_limit", args.time_limit)
    if h.readModel(args.model) != highspy.HighsStatus.kOk:
        print(f"cannot read {args.model}", file=sys.stderr)
        return 1
    h.run()
    ms = h.getModelStatus()
    S = highspy.HighsModelStatus
    status = {
        S.kOptimal: "optimal",
        S.kInfeasible: "infeasible",
        S.kUnbounded: "unbounded",
        S.kUnboundedOrInfeasible: "infeasible",
        S.kTimeLimit: "time_limit",
        S.kObjectiveBound: "gap_limit",
    }.get(ms)
    if status is None:
        print(f"unhandled HiGHS status {h.modelStatusToString(ms)}", file=sys.stderr)
        return 1
    with open(args.solution, "w") as fh:
        fh.write(status + "\n")
        if status in ("infeasible", "unbounded"):
            return 0
        info = h.getInfo()
        sol = h.getSolution()
        if status == "time_limit" and info.primal_solution_status == 0:
            fh.write("nan\n")
            return 0
        fh.write(repr(info.objective_function_value) + "\n")
        names = h.getLp().col_names_
        for name, v in zip(names, sol.col_value):
            fh.write(f"{name} {v!r}\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
