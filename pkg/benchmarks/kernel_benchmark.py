#!/usr/bin/env python3
"""Benchmark: compiled kernel vs pure-Python fallback on the hot workloads.

Both backends draw identical streams and produce identical aggregates (the
test suite asserts this); the only difference is speed.  Run:

    python benchmarks/kernel_benchmark.py [--reps-scale 1.0]
"""

import argparse
import time
from fractions import Fraction

import coinfactory._kernels as kernels
from coinfactory.engine import run_cell, run_von_neumann
from coinfactory.expr import parse_expression

F = Fraction

WORKLOADS = [
    ("sequential-stop sqrt p=1/4", "sqrt", "rand", F(1, 4), 200_000, {}),
    ("sequential-stop entropy p=1/10", "entropy", "rand", F(1, 10), 100_000, {}),
    ("non-randomized sqrt p=1/2", "sqrt", "nonrand", F(1, 2), 50_000, {}),
    ("two-phase baseline sqrt p=1/2 cap=1e4", "baseline(sqrt)", "rand", F(1, 2),
     20_000, {"cap": 10_000}),
    ("transforms prod(scale(sqrt,1/2),entropy) p=1/2",
     "prod(scale(sqrt,alpha=1/2),entropy)", "rand", F(1, 2), 100_000, {}),
]


def time_cell(backend, expression, algo, p, reps, opts):
    tree = parse_expression(expression)
    run_cell(tree, algo, p, min(reps, 1000), 1, backend=backend, **opts)  # warm tables
    start = time.perf_counter()
    cell = run_cell(tree, algo, p, reps, 42, backend=backend, **opts)
    elapsed = time.perf_counter() - start
    return elapsed, cell


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--reps-scale", type=float, default=1.0,
                        help="scale every workload's replication count")
    args = parser.parse_args()

    backends = ["pure"]
    if kernels.compiled is not None:
        backends.insert(0, "compiled")
    else:
        print("note: compiled extension not available, timing pure only")

    print(f"{'workload':<48} {'reps':>9}  " +
          "  ".join(f"{b:>10}" for b in backends) + "   speedup")
    for label, expression, algo, p, reps, opts in WORKLOADS:
        reps = int(reps * args.reps_scale)
        times = {}
        checks = {}
        for backend in backends:
            elapsed, cell = time_cell(backend, expression, algo, p, reps, opts)
            times[backend] = elapsed
            checks[backend] = (cell.sum_y, cell.sum_n)
        if len(backends) == 2:
            assert checks["compiled"] == checks["pure"], "backend outputs diverged"
            speedup = f"{times['pure'] / times['compiled']:8.1f}x"
        else:
            speedup = "       -"
        cols = "  ".join(f"{times[b]:9.3f}s" for b in backends)
        print(f"{label:<48} {reps:>9}  {cols}  {speedup}")

    # fair-bit extraction
    reps = int(500_000 * args.reps_scale)
    times = {}
    for backend in backends:
        run_von_neumann(F(1, 10), 1000, 1, backend=backend)
        start = time.perf_counter()
        run_von_neumann(F(1, 10), reps, 42, backend=backend)
        times[backend] = time.perf_counter() - start
    speedup = (f"{times['pure'] / times['compiled']:8.1f}x"
               if len(backends) == 2 else "       -")
    cols = "  ".join(f"{times[b]:9.3f}s" for b in backends)
    print(f"{'fair-bit extraction p=1/10':<48} {reps:>9}  {cols}  {speedup}")


if __name__ == "__main__":
    main()
