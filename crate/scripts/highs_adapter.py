#!/usr/bin/env python3
"""Solve an MPS model with HiGHS and write the planner's solution file.

Usage: highs_adapter.py MODEL.mps SOLUTION.txt [--time-limit S] [--threads N] [--seed N]

Example solver command for the planner:
    python3 scripts/highs_adapter.py {mps} {sol} --time-limit {time_limit} --threads {threads} --seed {seed}
"""

import argparse
import sys

import highspy


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("mps")
    ap.add_argument("sol")
    ap.add_argument("--time-limit", type=float, default=600.0)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("time_limit", args.time_limit)
    h.setOptionValue("threads", args.threads)
    h.setOptionValue("random_seed", args.seed)
    h.setOptionValue("mip_rel_gap", 0.0)
    if h.readModel(args.mps) != highspy.HighsStatus.kOk:
        print(f"cannot read {args.mps}", file=sys.stderr)
        return 2
    h.run()
    status = h.getModelStatus()
    ms = highspy.HighsModelStatus
    info = h.getInfo()

    with open(args.sol, "w") as out:
        if status == ms.kInfeasible:
            out.write("=status= infeasible\n")
            return 0
        has_plan = info.primal_solution_status == 2  # feasible
        if status == ms.kOptimal:
            out.write("=status= optimal\n")
        elif has_plan:
            out.write("=status= feasible-gap\n")
        else:
            out.write("=status= timeout\n")
            return 0
        out.write(f"=obj= {info.objective_function_value!r}\n")
        gap = 0.0 if status == ms.kOptimal else max(info.mip_gap, 0.0)
        out.write(f"=gap= {gap!r}\n")
        lp = h.getLp()
        values = h.getSolution().col_value
        for name, value in zip(lp.col_names_, values):
            if abs(value) > 1e-12:
                out.write(f"{name} {value!r}\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
