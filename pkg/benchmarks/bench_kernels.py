"""Benchmark the compiled search kernel against the pure-Python twin.

Usage: python3 benchmarks/bench_kernels.py [--n 20000] [--dim 128] [--k 5]

Both implementations are run on identical seeded inputs; the script also
verifies they return identical results before timing.
"""

from __future__ import annotations

import argparse
import random
import time
from array import array

from compactrag._kernels.pure import cosine_topk as pure_cosine_topk

try:
    from compactrag._kernels._cosine import cosine_topk as compiled_cosine_topk
except ImportError:
    compiled_cosine_topk = None


def make_inputs(n: int, dim: int, n_queries: int, seed: int = 0):
    rng = random.Random(seed)
    matrix = array("d", [rng.uniform(-1.0, 1.0) for _ in range(n * dim)])
    queries = [array("d", [rng.uniform(-1.0, 1.0) for _ in range(dim)]) for _ in range(n_queries)]
    return matrix, queries


def time_impl(impl, matrix, n, dim, queries, k, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        for query in queries:
            impl(matrix, n, dim, query, k)
        best = min(best, time.perf_counter() - start)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=20_000, help="index rows")
    parser.add_argument("--dim", type=int, default=128, help="vector dimension")
    parser.add_argument("--k", type=int, default=5, help="top-k")
    parser.add_argument("--queries", type=int, default=10, help="queries per timing pass")
    parser.add_argument("--repeats", type=int, default=3, help="timing passes, best taken")
    args = parser.parse_args()

    matrix, queries = make_inputs(args.n, args.dim, args.queries)
    print(f"index: {args.n} x {args.dim}, k={args.k}, {args.queries} queries per pass")

    sample = queries[0]
    pure_result = pure_cosine_topk(matrix, args.n, args.dim, sample, args.k)
    if compiled_cosine_topk is not None:
        compiled_result = compiled_cosine_topk(matrix, args.n, args.dim, sample, args.k)
        assert compiled_result == pure_result, "kernel outputs diverge"
        print("outputs identical: yes")

    pure_time = time_impl(pure_cosine_topk, matrix, args.n, args.dim, queries, args.k, args.repeats)
    per_query_pure = pure_time / args.queries * 1000
    print(f"pure python : {pure_time:8.3f}s total, {per_query_pure:8.2f} ms/query")

    if compiled_cosine_topk is None:
        print("compiled    : not built (pip install -e . with Cython available)")
        return
    compiled_time = time_impl(
        compiled_cosine_topk, matrix, args.n, args.dim, queries, args.k, args.repeats
    )
    per_query_compiled = compiled_time / args.queries * 1000
    print(f"compiled    : {compiled_time:8.3f}s total, {per_query_compiled:8.2f} ms/query")
    print(f"speedup     : {pure_time / compiled_time:8.1f}x")


if __name__ == "__main__":
    main()
