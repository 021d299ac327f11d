#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-Python fallback.

Usage: python benchmarks/bench_kernels.py [--nodes 400] [--edges 4000]

Times the path-affinity scan over a random knowledge graph and the
annealing chain over a random energy table, once through the compiled
kernels and once through the reference implementations (what you get
with ACTINFER_NUMBA=0).
"""

from __future__ import annotations

import argparse
import math
import time

import numpy as np

from actinfer import _kernels
from actinfer.kgraph import load_graph

RELATIONS = ("IsA", "UsedFor", "HasProperty", "RelatedTo", "AtLocation")


def build_graph(rng, n_nodes, n_edges):
    names = [f"n{i:04d}" for i in range(n_nodes)]
    rows = []
    for _ in range(n_edges):
        a, b = rng.choice(n_nodes, size=2, replace=False)
        rel = RELATIONS[int(rng.integers(len(RELATIONS)))]
        rows.append((names[int(a)], rel, names[int(b)], float(rng.uniform(0.2, 3.0))))
    return load_graph(rows)


def timeit(fn, repeats=3):
    best = math.inf
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench_affinity(rng, n_nodes, n_edges, pairs=300, max_hops=3):
    graph = build_graph(rng, n_nodes, n_edges)
    indptr, nbrs, wts, comp = graph._csr_arrays()
    decay = np.array([math.exp(-1.0 * (d + 1)) for d in range(max_hops)])
    n = len(graph.node_list)
    queries = rng.integers(0, n, size=(pairs, 2))

    def run(kernel):
        total = 0.0
        for src, dst in queries:
            total += kernel(indptr, nbrs, wts, comp, decay, int(src), int(dst), max_hops)
        return total

    _kernels.affinity_scan(indptr, nbrs, wts, comp, decay, 0, 1, max_hops)  # compile
    jit = timeit(lambda: run(_kernels.affinity_scan))
    ref = timeit(lambda: run(_kernels.affinity_scan_py))
    return jit, ref


def bench_anneal(rng, n_obj=20, n_act=20, iterations=200_000):
    energies = rng.uniform(0.0, 15.0, size=(n_obj, n_act))
    u_init = rng.random(2)
    u_steps = rng.random((iterations, 3))
    stage_len = max(iterations // 100, 1)

    _kernels.anneal_scan(energies, 1.0, 0.95, stage_len, u_init, u_steps[:10])  # compile
    jit = timeit(lambda: _kernels.anneal_scan(energies, 1.0, 0.95, stage_len, u_init, u_steps))
    ref = timeit(lambda: _kernels.anneal_scan_py(energies, 1.0, 0.95, stage_len, u_init, u_steps))
    return jit, ref


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--nodes", type=int, default=400)
    parser.add_argument("--edges", type=int, default=4000)
    parser.add_argument("--iterations", type=int, default=200_000)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    if not _kernels.NUMBA_ENABLED:
        print("numba backend is disabled (ACTINFER_NUMBA=0 or numba missing);")
        print("both columns below will time the pure-Python path.")

    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<16} {'numba':>12} {'fallback':>12} {'speedup':>9}")
    jit, ref = bench_affinity(rng, args.nodes, args.edges)
    print(f"{'affinity_scan':<16} {jit:>11.4f}s {ref:>11.4f}s {ref / jit:>8.1f}x")
    jit, ref = bench_anneal(rng, iterations=args.iterations)
    print(f"{'anneal_scan':<16} {jit:>11.4f}s {ref:>11.4f}s {ref / jit:>8.1f}x")


if __name__ == "__main__":
    main()
