"""Command-line interface.

Subcommands: generate, solve, grid, compare, remark. Every flag can also be
given through a key=value config file (``--config path``); explicit CLI flags
override the file. Exit codes: 0 success, 1 parameter error (including bad
flags), 2 runtime failure.
"""

import argparse
import os
import sys
import time
from dataclasses import replace

import numpy as np

from . import linalg
from .generators import (GeneratorSpec, NoiseSpec, density,
                         gen_low_rank_sparse, normalize_spectral, add_noise)
from .harness import (GridSpec, SolverOptions, emit_csv, emit_heatmap,
                      relative_error, run_grid, run_remark_suite, run_solver,
                      SOLVER_NAMES)
from .sampling import (ObservationMask, degrees_of_freedom_ratio, project,
                       structured_sample)
from .seeding import derive_seed, make_rng
from .sirls import LowRankConfig, export_trace, solve_sirls
from .structured import StructuredConfig, solve_structured_sirls


class _CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse parser that reports usage errors as exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise _CliError(message)


def _add_solver_flags(p):
    p.add_argument("--solver", choices=SOLVER_NAMES, default="ssirls")
    p.add_argument("--p", type=float, default=1.0, help="low-rank exponent p")
    p.add_argument("--q", type=float, default=1.0, help="sparsity exponent q")
    p.add_argument("--alpha", type=float, default=1e-2,
                   help="missing-entry penalty weight (snnm, irls-exact)")
    p.add_argument("--ks", type=int, default=1, help="sparsity steps per outer iteration")
    p.add_argument("--kl", type=int, default=10, help="low-rank steps per outer iteration")
    p.add_argument("--tol", type=float, default=None,
                   help="convergence tolerance (default per solver)")
    p.add_argument("--max-iter", type=int, default=None,
                   help="iteration budget (default per solver)")
    p.add_argument("--penalty-norm", choices=("l1", "l2"), default="l1")
    p.add_argument("--nonneg", action="store_true",
                   help="threshold recovered missing entries at zero")


def _add_problem_flags(p, size=(100, 100), rank=10):
    p.add_argument("--size", type=int, nargs=2, metavar=("M", "N"), default=list(size))
    p.add_argument("--rank", type=int, default=rank)
    p.add_argument("--rank-unknown", action="store_true",
                   help="estimate the rank per iteration instead of using --rank")
    p.add_argument("--zero-frac-left", type=float, default=0.7)
    p.add_argument("--zero-frac-right", type=float, default=0.5)
    p.add_argument("--noise", type=float, default=0.0, metavar="EPS")
    p.add_argument("--seed", type=int, default=0)


def _solver_options(args):
    opts = SolverOptions(p=args.p, q=args.q, alpha=args.alpha,
                         k_s=args.ks, k_l=args.kl,
                         penalty_norm=args.penalty_norm,
                         nonneg=getattr(args, "nonneg", False))
    if args.tol is not None:
        opts = replace(opts, tol=args.tol, exact_tol=args.tol, nnm_tol=args.tol)
    if args.max_iter is not None:
        opts = replace(opts, max_iter_sirls=args.max_iter,
                       max_iter_ssirls=args.max_iter,
                       nnm_max_iter=args.max_iter,
                       exact_max_iter=args.max_iter)
    return opts


def _rate_grid(args):
    start, stop, step = args.rates
    if step <= 0 or stop < start:
        raise ValueError("--rates needs start <= stop and step > 0")
    vals = np.arange(start, stop + step * 0.5, step)
    vals = tuple(round(float(v), 10) for v in vals)
    zero_vals = tuple(args.zero_rates) if args.zero_rates else vals
    nonzero_vals = tuple(args.nonzero_rates) if args.nonzero_rates else vals
    return zero_vals, nonzero_vals


def _synthetic_problem(args, rate_zero, rate_nonzero):
    """Generate (M, ref, mask, M_obs) for the solve/generate paths."""
    m, n = args.size
    gspec = GeneratorSpec(m=m, n=n, r=args.rank,
                          zero_frac_left=args.zero_frac_left,
                          zero_frac_right=args.zero_frac_right,
                          seed=derive_seed(args.seed, 0))
    M = gen_low_rank_sparse(gspec)
    M = normalize_spectral(M, rng=make_rng(derive_seed(args.seed, 4)))
    mask = structured_sample(M, rate_zero, rate_nonzero,
                             rng=make_rng(derive_seed(args.seed, 1)))
    if args.noise > 0:
        ref = add_noise(M, mask, NoiseSpec(args.noise, derive_seed(args.seed, 2)))
    else:
        ref = M
    return M, ref, mask, project(ref, mask)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_generate(args):
    M, ref, mask, _ = _synthetic_problem(args, args.rate_zero, args.rate_nonzero)
    os.makedirs(args.out, exist_ok=True)
    matrix_path = os.path.join(args.out, "matrix.txt")
    mask_path = os.path.join(args.out, "mask.csv")
    linalg.write_dense(M, matrix_path)
    mask.save_csv(mask_path)
    extra = ""
    if args.noise > 0:
        noisy_path = os.path.join(args.out, "noisy.txt")
        linalg.write_dense(ref, noisy_path)
        extra = f", noisy matrix -> {noisy_path}"
    fr = degrees_of_freedom_ratio(mask.rows, mask.cols, args.rank,
                                  max(1, mask.n_observed))
    print(f"wrote {mask.rows}x{mask.cols} rank-{args.rank} matrix -> {matrix_path}"
          f", mask ({mask.n_observed} observed, FR={fr:.4g}) -> {mask_path}{extra}")
    print(f"density: {density(M):.4f}")
    return 0


def _cmd_solve(args):
    if (args.matrix is None) != (args.mask is None):
        raise ValueError("--matrix and --mask must be given together")
    if args.matrix is not None:
        M_ref = linalg.read_dense(args.matrix)
        mask = ObservationMask.load_csv(args.mask)
        if M_ref.shape != mask.shape:
            raise ValueError("matrix and mask shapes differ")
        M_obs = project(M_ref, mask)
        rank_input = None if args.rank_unknown else (args.rank if args.rank > 0 else None)
    else:
        _, M_ref, mask, M_obs = _synthetic_problem(args, args.rate_zero,
                                                   args.rate_nonzero)
        rank_input = None if args.rank_unknown else args.rank

    opts = _solver_options(args)
    t0 = time.perf_counter()
    seed = derive_seed(args.seed, 3)
    result = None
    if args.solver == "sirls":
        cfg = LowRankConfig(p=opts.p, tol=opts.tol, max_iter=opts.max_iter_sirls,
                            rank_input=rank_input, seed=seed)
        result = solve_sirls(M_obs, mask, cfg)
        X = result.X_hat
    elif args.solver == "ssirls":
        lr = LowRankConfig(p=opts.p, tol=opts.tol, max_iter=opts.max_iter_ssirls,
                           rank_input=rank_input, seed=seed)
        cfg = StructuredConfig(lowrank=lr, q=opts.q, k_s=opts.k_s, k_l=opts.k_l,
                               c_rule=opts.c_const, nonneg=opts.nonneg)
        result = solve_structured_sirls(M_obs, mask, cfg)
        X = result.X_hat
    else:
        X = run_solver(args.solver, M_obs, mask, opts, rank_input, seed)
    elapsed = time.perf_counter() - t0

    err = relative_error(M_ref, X)
    print(f"solver={args.solver} size={mask.rows}x{mask.cols} "
          f"observed={mask.n_observed} relative_error={err!r} "
          f"elapsed={elapsed:.2f}s")
    if result is not None:
        print(f"iterations={result.iterations} converged={result.converged} "
              f"final_distance={result.relative_distance()!r}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        linalg.write_dense(X, os.path.join(args.out, "X_hat.txt"))
        if result is not None:
            export_trace(result, os.path.join(args.out, "trace.csv"))
        print(f"wrote outputs to {args.out}")
    return 0


def _run_grid_command(args, default_solvers):
    zero_vals, nonzero_vals = _rate_grid(args)
    m, n = args.size
    gspec = GeneratorSpec(m=m, n=n, r=args.rank,
                          zero_frac_left=args.zero_frac_left,
                          zero_frac_right=args.zero_frac_right)
    noise = NoiseSpec(args.noise) if args.noise > 0 else None
    solvers = tuple(args.solvers) if args.solvers else default_solvers
    spec = GridSpec(generator=gspec, rate_zero_values=zero_vals,
                    rate_nonzero_values=nonzero_vals, trials=args.trials,
                    noise=noise, solvers=solvers,
                    solver_opts=_solver_options(args),
                    rank_known=not args.rank_unknown,
                    base_seed=args.seed, jobs=args.jobs)
    t0 = time.perf_counter()
    results = run_grid(spec)
    elapsed = time.perf_counter() - t0

    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "results.csv")
    emit_csv(results, csv_path)
    written = [csv_path]
    for name in solvers:
        path = os.path.join(args.out, f"error_{name.replace('-', '_')}.pgm")
        emit_heatmap(results, f"error:{name}", path)
        written.append(path)
    if len(solvers) >= 2:
        for metric, fname in (("average_ratio", "ratio.pgm"), ("binned", "binned.pgm")):
            path = os.path.join(args.out, fname)
            emit_heatmap(results, metric, path)
            written.append(path)

    wins = sum(c.binned_ratio for c in results)
    print(f"grid: {len(zero_vals)}x{len(nonzero_vals)} cells, "
          f"{args.trials} trials each, {elapsed:.1f}s")
    if len(solvers) >= 2:
        print(f"{solvers[0]} beats {solvers[1]} (average ratio < 1) in "
              f"{wins}/{len(results)} cells")
    print("wrote: " + ", ".join(written))
    return 0


def _cmd_grid(args):
    return _run_grid_command(args, default_solvers=("ssirls", "sirls"))


def _cmd_compare(args):
    return _run_grid_command(args, default_solvers=("ssirls", "snnm"))


def _cmd_remark(args):
    m, n = args.size
    passes, total, _ = run_remark_suite(trials=args.trials, seed=args.seed,
                                        m=m, n=n, rank=args.rank,
                                        alpha=args.alpha)
    print(f"{passes}/{total} inequality passes")
    return 0 if passes == total else 2


# ---------------------------------------------------------------------------
# parser assembly and config files
# ---------------------------------------------------------------------------

def build_parser():
    parser = _Parser(prog="structmc",
                     description="Low-rank completion with structured missing "
                                 "entries: solvers and experiment harness.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[], help="write a synthetic matrix and mask")
    _add_problem_flags(p)
    p.add_argument("--rate-zero", type=float, default=0.3)
    p.add_argument("--rate-nonzero", type=float, default=0.8)
    p.add_argument("--out", default=".")
    p.add_argument("--config", help="key=value file mirroring the flags")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("solve", help="complete one matrix with one solver")
    _add_problem_flags(p)
    _add_solver_flags(p)
    p.add_argument("--matrix", help="dense matrix file (with --mask)")
    p.add_argument("--mask", help="observation mask CSV (with --matrix)")
    p.add_argument("--rate-zero", type=float, default=0.3)
    p.add_argument("--rate-nonzero", type=float, default=0.8)
    p.add_argument("--out", default=None)
    p.add_argument("--config")
    p.set_defaults(func=_cmd_solve)

    for name, cmd, size, rank, trials in (
            ("grid", _cmd_grid, (100, 100), 10, 20),
            ("compare", _cmd_compare, (30, 30), 7, 3)):
        p = sub.add_parser(name, help=("run a sampling-rate grid experiment"
                                       if name == "grid" else
                                       "small-scale grid including the exact solvers"))
        _add_problem_flags(p, size=size, rank=rank)
        _add_solver_flags(p)
        p.add_argument("--rates", type=float, nargs=3,
                       metavar=("START", "STOP", "STEP"),
                       default=[0.10, 1.00, 0.05])
        p.add_argument("--zero-rates", type=float, nargs="+", default=None)
        p.add_argument("--nonzero-rates", type=float, nargs="+", default=None)
        p.add_argument("--trials", type=int, default=trials)
        p.add_argument("--solvers", nargs="+", choices=SOLVER_NAMES, default=None)
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--out", required=True)
        p.add_argument("--config")
        p.set_defaults(func=cmd)

    p = sub.add_parser("remark", help="single-iteration inequality property suite")
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--size", type=int, nargs=2, metavar=("M", "N"), default=[10, 10])
    p.add_argument("--rank", type=int, default=2)
    p.add_argument("--config")
    p.set_defaults(func=_cmd_remark)
    return parser


def _load_config_tokens(path):
    tokens = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, _, val = line.partition("=")
            flag = "--" + key.strip().replace("_", "-")
            val = val.strip()
            if val.lower() in ("true", "false"):
                if val.lower() == "true":
                    tokens.append(flag)
            else:
                tokens.append(flag)
                tokens.extend(val.split())
    return tokens


def _apply_config(argv):
    """Splice config-file tokens after the subcommand so explicit flags win."""
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    if i + 1 >= len(argv):
        raise ValueError("--config requires a path")
    path = argv[i + 1]
    rest = argv[:i] + argv[i + 2:]
    if not rest or rest[0].startswith("-"):
        raise ValueError("--config must follow a subcommand")
    return [rest[0]] + _load_config_tokens(path) + rest[1:]


def cli_main(argv=None):
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    try:
        argv = _apply_config(argv)
        args = parser.parse_args(argv)
    except _CliError:
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
