#!/usr/bin/env python3
"""Benchmark the compiled kernel core against the pure-numpy fallback.

Times the three hot kernels on representative problem sizes, then an
end-to-end structured solve with each backend. Run after installing:

    python3 benchmarks/bench_kernels.py [--sizes 100 300 1000] [--repeat 5]
"""

import argparse
import time

import numpy as np

from structmc import kernels
from structmc.generators import GeneratorSpec, gen_low_rank_sparse, normalize_spectral
from structmc.sampling import project, structured_sample
from structmc.seeding import make_rng
from structmc.sirls import LowRankConfig
from structmc.structured import StructuredConfig, solve_structured_sirls


def _time(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernels(n, repeat):
    rng = make_rng(0)
    X = rng.standard_normal((n, n))
    G = rng.standard_normal((n, n))
    obs = np.ascontiguousarray((rng.random((n, n)) < 0.5).view(np.uint8))
    M_obs = np.where(obs.astype(bool), X, 0.0)
    idx = np.flatnonzero(obs.ravel() == 0).astype(np.int64)
    w = rng.uniform(0.5, 2.0, idx.size)
    out = np.empty_like(X)
    wout = np.empty(idx.size)
    rows = []
    for name, fn in (
        ("masked_gradient_update",
         lambda: kernels.masked_gradient_update(X, G, 0.3, obs, M_obs, out)),
        ("sparsity_step_inplace",
         lambda: kernels.sparsity_step_inplace(X.ravel(), idx, w, 1e-6)),
        ("sparsity_weights_flat",
         lambda: kernels.sparsity_weights_flat(X.ravel(), idx, 0.3, 1.0, wout)),
    ):
        times = {}
        for backend in ("compiled", "pure"):
            if backend == "compiled" and not kernels.HAVE_COMPILED:
                times[backend] = float("nan")
                continue
            kernels.set_backend(backend)
            times[backend] = _time(fn, repeat)
        rows.append((name, n, times["compiled"], times["pure"]))
    return rows


def bench_solve(n, repeat):
    M = normalize_spectral(gen_low_rank_sparse(GeneratorSpec(n, n, 10, seed=1)))
    mask = structured_sample(M, 0.2, 0.8, rng=2)
    M_obs = project(M, mask)
    cfg = StructuredConfig(lowrank=LowRankConfig(max_iter=200, rank_input=10, seed=3))
    times = {}
    for backend in ("compiled", "pure"):
        if backend == "compiled" and not kernels.HAVE_COMPILED:
            times[backend] = float("nan")
            continue
        kernels.set_backend(backend)
        times[backend] = _time(lambda: solve_structured_sirls(M_obs, mask, cfg),
                               max(1, repeat // 2))
    return ("solve_structured_sirls", n, times["compiled"], times["pure"])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", type=int, nargs="+", default=[100, 300, 1000])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    if not kernels.HAVE_COMPILED:
        print("note: compiled core not available; timing the pure backend only")
    original = kernels.backend_name()
    rows = []
    try:
        for n in args.sizes:
            rows.extend(bench_kernels(n, args.repeat))
        for n in args.sizes:
            if n <= 300:
                rows.append(bench_solve(n, args.repeat))
    finally:
        kernels.set_backend(original)

    print(f"{'kernel':28s} {'n':>5s} {'compiled':>12s} {'pure':>12s} {'speedup':>8s}")
    for name, n, tc, tp in rows:
        speed = tp / tc if tc == tc and tc > 0 else float("nan")
        print(f"{name:28s} {n:5d} {tc * 1e3:10.3f}ms {tp * 1e3:10.3f}ms {speed:7.2f}x")


if __name__ == "__main__":
    main()
