"""Acceptance suite: one test per top-level criterion, each printing a
[PASS]/[FAIL] line (run with ``pytest tests/test_acceptance.py -v -s``).

Every tolerance is pinned here; the grid criteria run the same harness the
CLI drives.
"""

import time

import numpy as np
import pytest
from scipy.optimize import minimize

from structmc.exact import (NnmConfig, solve_structured_irls_exact,
                            solve_structured_nnm, structured_irls_iteration)
from structmc.generators import (GeneratorSpec, NoiseSpec, add_noise,
                                 gen_low_rank_sparse, normalize_spectral)
from structmc.harness import (GridSpec, SolverOptions, emit_heatmap,
                              relative_error, run_grid, run_remark_suite)
from structmc.sampling import (ObservationMask, degrees_of_freedom_ratio,
                               project, structured_sample)
from structmc.seeding import make_rng
from structmc.sirls import (LowRankConfig, iterate_distance,
                            schatten_surrogate, solve_sirls, weight_matrix)
from structmc.structured import (StructuredConfig, solve_structured_sirls,
                                 sparsity_weights)


def _report(num, desc, ok, detail, elapsed):
    status = "PASS" if ok else "FAIL"
    print(f"[{status}] criterion {num}: {desc} ({detail}) [{elapsed:.1f}s]")
    assert ok, f"criterion {num} failed: {detail}"


def test_criterion_01_remark_suite():
    t0 = time.perf_counter()
    passes, total, _ = run_remark_suite(trials=50, seed=1, m=10, n=10, rank=2)
    elapsed = time.perf_counter() - t0
    ok = passes == total == 50 and elapsed < 30.0
    _report(1, "single-iteration inequality on 50 zero-missing instances",
            ok, f"{passes}/{total} passes", elapsed)


def test_criterion_02_gradient_correctness():
    t0 = time.perf_counter()
    rng = make_rng(2)
    worst_f = 0.0
    for p in (0.5, 1.0):
        for _ in range(10):
            X = rng.standard_normal((5, 5))
            gamma = 0.4
            G = p * (X @ weight_matrix(X, gamma, p, 5))
            h = 1e-6
            G_fd = np.zeros_like(X)
            for i in range(5):
                for j in range(5):
                    Xp, Xm = X.copy(), X.copy()
                    Xp[i, j] += h
                    Xm[i, j] -= h
                    G_fd[i, j] = (schatten_surrogate(Xp, gamma, p)
                                  - schatten_surrogate(Xm, gamma, p)) / (2 * h)
            worst_f = max(worst_f,
                          np.linalg.norm(G - G_fd) / np.linalg.norm(G_fd))
    worst_g = 0.0
    for q in (0.5, 1.0):
        for _ in range(10):
            z = rng.standard_normal(20)
            w = sparsity_weights(z, 0.3, q)
            grad = 2.0 * w * z
            h = 1e-7
            grad_fd = np.array(
                [(np.sum(w * (z + h * e) ** 2) - np.sum(w * (z - h * e) ** 2))
                 / (2 * h) for e in np.eye(20)])
            worst_g = max(worst_g,
                          np.linalg.norm(grad - grad_fd) / np.linalg.norm(grad_fd))
    elapsed = time.perf_counter() - t0
    ok = worst_f < 1e-5 and worst_g < 1e-6 and elapsed < 10.0
    _report(2, "analytic gradients vs central finite differences", ok,
            f"low-rank rel {worst_f:.2e} < 1e-5, sparsity rel {worst_g:.2e} < 1e-6",
            elapsed)


def test_criterion_03_oracle_equivalence():
    t0 = time.perf_counter()
    rng = make_rng(3)
    worst = 0.0
    for _ in range(20):
        M_obs = rng.standard_normal((3, 3))
        while True:
            obs = rng.random((3, 3)) < 0.6
            if obs.any() and not obs.all():
                break
        mask = ObservationMask(obs)
        M_obs = project(M_obs, mask)
        A = rng.standard_normal((3, 3))
        W = A @ A.T / 3 + 0.2 * np.eye(3)
        w = rng.uniform(0.5, 2.0, mask.n_missing)
        alpha = 0.5
        got = structured_irls_iteration(M_obs, mask, W, w, alpha)

        miss = mask.missing_flat()

        def obj(zv):
            X = M_obs.copy()
            X.ravel()[miss] = zv
            return float(np.trace(X.T @ W @ X) + alpha * np.sum(w * zv * zv))

        best = None
        for _ in range(3):
            res = minimize(obj, rng.standard_normal(miss.size),
                           method="L-BFGS-B",
                           options={"ftol": 1e-16, "gtol": 1e-12,
                                    "maxiter": 20000})
            if best is None or res.fun < best.fun:
                best = res
        ref = M_obs.copy()
        ref.ravel()[miss] = best.x
        worst = max(worst, float(np.max(np.abs(got - ref))))

    # scalar-search oracle for the penalized nuclear-norm completion
    mask2 = ObservationMask(np.array([[True, True], [True, False]]))
    M2 = np.ones((2, 2))
    worst_nnm = 0.0
    for alpha in (0.0, 0.5, 10.0):
        X = solve_structured_nnm(project(M2, mask2), mask2,
                                 NnmConfig(alpha=alpha))
        ts = np.linspace(-2.0, 2.0, 80001)
        fs = [np.linalg.svd(np.array([[1.0, 1.0], [1.0, t]]),
                            compute_uv=False).sum() + alpha * abs(t)
              for t in ts]
        t_ref = ts[int(np.argmin(fs))]
        worst_nnm = max(worst_nnm, abs(X[1, 1] - t_ref))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-6 and worst_nnm < 1e-3 and elapsed < 60.0
    _report(3, "exact QP iteration and penalized completion vs oracles", ok,
            f"QP entrywise {worst:.2e} < 1e-6, scalar-search {worst_nnm:.2e} < 1e-3",
            elapsed)


def test_criterion_04_degenerate_exactness(tmp_path):
    t0 = time.perf_counter()
    M = normalize_spectral(gen_low_rank_sparse(GeneratorSpec(12, 12, 3, seed=4)))
    full = ObservationMask.full(12, 12)
    errs = {
        "sirls": relative_error(M, solve_sirls(
            M, full, LowRankConfig(rank_input=3)).X_hat),
        "ssirls": relative_error(M, solve_structured_sirls(
            M, full, StructuredConfig(
                lowrank=LowRankConfig(max_iter=1000, rank_input=3))).X_hat),
        "snnm": relative_error(M, solve_structured_nnm(M, full)),
        "irls-exact": relative_error(M, solve_structured_irls_exact(
            M, full).X_hat),
    }
    d_self = iterate_distance(M, M)

    spec = GridSpec(generator=GeneratorSpec(m=12, n=12, r=3),
                    rate_zero_values=(1.0,), rate_nonzero_values=(1.0,),
                    trials=2, solvers=("ssirls", "sirls"), base_seed=1)
    (cell,) = run_grid(spec)
    pgm = tmp_path / "binned.pgm"
    emit_heatmap([cell], "binned", pgm)
    with open(pgm, "rb") as fh:
        fh.readline(), fh.readline(), fh.readline()
        pixel = fh.read()[0]
    elapsed = time.perf_counter() - t0
    ok = (all(e <= 1e-15 for e in errs.values()) and d_self == 0.0
          and cell.average_ratio == 1.0 and pixel == 0)
    _report(4, "full observation is exact for all four solvers; (1,1) cell "
               "has ratio 1 and a black binned pixel", ok,
            f"errors {[f'{v:.1e}' for v in errs.values()]}, d(X,X)={d_self}, "
            f"ratio={cell.average_ratio}, pixel={pixel}", elapsed)


def test_criterion_05_fr_arithmetic():
    t0 = time.perf_counter()
    got = degrees_of_freedom_ratio(100, 100, 20, 9000)
    elapsed = time.perf_counter() - t0
    _report(5, "degrees-of-freedom ratio arithmetic", got == 0.4,
            f"FR(100,100,20,9000) = {got!r} == 0.4", elapsed)


def test_criterion_06_structured_regime_win_rate():
    t0 = time.perf_counter()
    spec = GridSpec(generator=GeneratorSpec(m=100, n=100, r=10),
                    rate_zero_values=(0.1, 0.2, 0.3),
                    rate_nonzero_values=(0.7, 0.8, 0.9),
                    trials=5, solvers=("ssirls", "sirls"),
                    rank_known=True, base_seed=6)
    results = run_grid(spec)
    wins = sum(c.binned_ratio for c in results)
    fails = sum(sum(c.failures.values()) for c in results)
    elapsed = time.perf_counter() - t0
    ok = wins >= 7 and fails == 0 and elapsed < 900.0
    _report(6, "structured solver beats baseline in >= 7 of 9 structured cells",
            ok, f"white cells {wins}/9, ratios "
                f"{[round(c.average_ratio, 3) for c in results]}", elapsed)


def test_criterion_07_noise_robustness():
    t0 = time.perf_counter()
    means = {}
    for eps in (1e-4, 1e-3):
        spec = GridSpec(generator=GeneratorSpec(m=100, n=100, r=3),
                        rate_zero_values=(0.1, 0.2, 0.3),
                        rate_nonzero_values=(0.7, 0.8, 0.9),
                        trials=3, noise=NoiseSpec(eps),
                        solvers=("ssirls", "sirls"), rank_known=True,
                        base_seed=7)
        results = run_grid(spec)
        means[eps] = float(np.mean([c.average_ratio for c in results]))
    elapsed = time.perf_counter() - t0
    ok = means[1e-4] < 1.0 and 0.8 <= means[1e-3] <= 1.2 and elapsed < 900.0
    _report(7, "noisy completion: small-noise advantage, larger-noise parity",
            ok, f"mean ratio eps=1e-4: {means[1e-4]:.3f} < 1; "
                f"eps=1e-3: {means[1e-3]:.3f} in [0.8, 1.2]", elapsed)


def test_criterion_08_noise_norm_identity():
    t0 = time.perf_counter()
    rng = make_rng(8)
    M = normalize_spectral(gen_low_rank_sparse(GeneratorSpec(40, 40, 4, seed=8)))
    mask = structured_sample(M, 0.3, 0.8, rng=9)
    obs_norm = np.linalg.norm(project(M, mask))
    worst = 0.0
    for eps in (1e-6, 1e-4, 1e-3, 1e-2, 0.1, 1.0):
        B = add_noise(M, mask, NoiseSpec(eps, seed=10))
        got = np.linalg.norm(project(B - M, mask))
        worst = max(worst, abs(got - eps * obs_norm) / (eps * obs_norm))
    elapsed = time.perf_counter() - t0
    _report(8, "observed noise norm equals eps times observed data norm",
            worst < 1e-12, f"worst relative deviation {worst:.2e} < 1e-12",
            elapsed)


def test_criterion_09_determinism(tmp_path):
    t0 = time.perf_counter()
    from structmc.cli import cli_main
    args = ["grid", "--size", "12", "12", "--rank", "2", "--trials", "2",
            "--seed", "11", "--zero-rates", "0.5", "1.0",
            "--nonzero-rates", "0.9", "1.0", "--max-iter", "150"]
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    rc1 = cli_main(args + ["--out", str(out1)])
    rc2 = cli_main(args + ["--out", str(out2)])
    files = ["results.csv", "error_ssirls.pgm", "error_sirls.pgm",
             "ratio.pgm", "binned.pgm"]
    same = all((out1 / f).read_bytes() == (out2 / f).read_bytes()
               for f in files)
    elapsed = time.perf_counter() - t0
    ok = rc1 == rc2 == 0 and same
    _report(9, "repeated grid runs are byte-identical (CSV and PGM)", ok,
            f"{len(files)} artifacts compared", elapsed)


def test_criterion_10_structured_nnm_comparison():
    t0 = time.perf_counter()
    spec = GridSpec(generator=GeneratorSpec(m=30, n=30, r=7),
                    rate_zero_values=(0.2, 0.4),
                    rate_nonzero_values=(0.7, 0.9),
                    trials=3, solvers=("ssirls", "snnm"),
                    solver_opts=SolverOptions(alpha=1e-2),
                    rank_known=True, base_seed=10)
    results = run_grid(spec)
    worst = max(max(c.solver_errors.values()) for c in results)
    fails = sum(sum(c.failures.values()) for c in results)
    elapsed = time.perf_counter() - t0
    ok = worst < 0.5 and fails == 0 and elapsed < 600.0
    _report(10, "structured gradient solver and penalized completion both "
                "recover 30x30 rank-7 cells", ok,
            f"worst mean error {worst:.3f} < 0.5, failures {fails}", elapsed)
