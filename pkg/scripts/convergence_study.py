#!/usr/bin/env python3
"""Iteration-count study across problem sizes and sweep schedules.

Solves seeded random instances of each problem class at increasing sizes
and prints one CSV row per run:

    class,n,schedule,iterations,residual,wall_ms

For the shortest-path graphs both schedules run on the same instance, so
the Gauss-Seidel rows show how much the in-sweep value reuse saves.  The
quadratic-regulator solver is a single coupled block (the schedules
coincide) and the desirability solver's primary route is a direct linear
solve, so those report the Jacobi schedule only.

Usage:
    python scripts/convergence_study.py [--sizes 10,20,40] [--seed 0]
"""

import argparse
import os
import sys
import time

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from conebellman.engine import Schedule, SolveConfig
from conebellman.generators import random_ldp, random_lqr, random_ssp_graph
from conebellman.ldp import solve_ldp
from conebellman.lqr import solve_lqr
from conebellman.ssp import compile_graph, solve_ssp


def row(cls: str, n: int, schedule: str, iters: int, res: float, ns: int) -> None:
    print(f"{cls},{n},{schedule},{iters},{res:.3e},{ns / 1e6:.3f}")


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="10,20,40")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    sizes = [int(tok) for tok in args.sizes.split(",")]

    print("class,n,schedule,iterations,residual,wall_ms")
    for n in sizes:
        g = random_ssp_graph(n, seed=args.seed, stochastic=True)
        p = compile_graph(g).problem
        for schedule in (Schedule.JACOBI, Schedule.GAUSS_SEIDEL):
            cfg = SolveConfig(schedule=schedule)
            t0 = time.perf_counter_ns()
            sol = solve_ssp(p, cfg)
            dt = time.perf_counter_ns() - t0
            row("ssp-graph", n, schedule.value, len(sol.trace), sol.stationarity, dt)

    # state dimension grows much slower than graph size: n // 4, capped at 10
    for n in sorted({max(2, min(n // 4, 10)) for n in sizes}):
        p = random_lqr(n, max(1, n // 2), seed=args.seed)
        t0 = time.perf_counter_ns()
        sol = solve_lqr(p)
        dt = time.perf_counter_ns() - t0
        row("lqr", p.n, "jacobi", len(sol.trace), sol.dare_residual, dt)

    for n in sizes:
        p = random_ldp(n, seed=args.seed)
        t0 = time.perf_counter_ns()
        sol = solve_ldp(p)
        dt = time.perf_counter_ns() - t0
        row("ldp", n, "jacobi", len(sol.trace), sol.bellman_residual, dt)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
