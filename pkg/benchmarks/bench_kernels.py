"""Time the pure-Python and compiled kernels on the same random inputs.

    python benchmarks/bench_kernels.py [--n 10] [--repeat 3] [--seed 0]

Each kernel runs on both backends; results must agree before timings are shown.
"""

from __future__ import annotations

import argparse
import random
import sys
import time
from typing import Any, Callable

from uets import kernels


def monotone_table(rng: random.Random, n: int) -> list[int]:
    # coverage functions: monotone and subadditive
    libs = [rng.getrandbits(6) | 1 for _ in range(n)]
    weights = [rng.randint(1, 9) for _ in range(6)]
    table = []
    for mask in range(1 << n):
        used = 0
        for j in range(n):
            if mask >> j & 1:
                used |= libs[j]
        table.append(sum(w for b, w in enumerate(weights) if used >> b & 1))
    return table


def additive_table(rng: random.Random, n: int) -> list[int]:
    # per-job weights: the min-max partition becomes number partitioning
    w = [rng.randint(100, 999) for _ in range(n)]
    return [sum(w[j] for j in range(n) if mask >> j & 1) for mask in range(1 << n)]


def metric(rng: random.Random, points: int) -> list[list[int]]:
    coords = [(rng.randint(0, 20), rng.randint(0, 20)) for _ in range(points)]
    return [[abs(a[0] - b[0]) + abs(a[1] - b[1]) for b in coords] for a in coords]


def best_of(fn: Callable[[], Any], repeat: int) -> tuple[float, Any]:
    best, out = float("inf"), None
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - start)
    return best, out


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=12, help="jobs in each set-function table")
    parser.add_argument("--points", type=int, default=11, help="points in the TSP metric")
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    if "cython" not in kernels.BACKENDS:
        print("compiled kernels are not built; run `pip install -e . --no-build-isolation` first", file=sys.stderr)
        return 1
    rng = random.Random(args.seed)
    table, n = monotone_table(rng, args.n), args.n
    additive = additive_table(rng, n)
    dist = metric(rng, args.points)
    cases = {
        "minmax_partition k=3": lambda mod: mod.minmax_partition(table, n, 3, n),
        "minmax_partition k=4 cap=3": lambda mod: mod.minmax_partition(table, n, 4, 3),
        "minmax_partition additive k=3": lambda mod: mod.minmax_partition(additive, n, 3, n),
        "monotone_violation": lambda mod: mod.monotone_violation(table, n),
        "subadditive_violation": lambda mod: mod.subadditive_violation(table, n),
        "closure_table": lambda mod: mod.closure_table(table, n),
        f"held_karp_all {args.points} points": lambda mod: mod.held_karp_all(dist),
    }
    print(f"{'kernel':<32} {'python s':>10} {'cython s':>10} {'speedup':>8}")
    for name, case in cases.items():
        slow, a = best_of(lambda: case(kernels.BACKENDS["python"]), args.repeat)
        fast, b = best_of(lambda: case(kernels.BACKENDS["cython"]), args.repeat)
        if (list(a) if isinstance(a, (list, tuple)) else a) != (list(b) if isinstance(b, (list, tuple)) else b):
            print(f"{name}: backends disagree", file=sys.stderr)
            return 1
        print(f"{name:<32} {slow:>10.4f} {fast:>10.4f} {slow / max(fast, 1e-9):>7.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
