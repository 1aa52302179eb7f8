"""Reweighted gradient-projection completion (baseline solver) and shared
low-rank machinery: weight matrices, the smooth rank surrogate, the
per-iteration rank estimate, and the projected gradient step.

The surrogate being minimized over the missing entries is
f_p(X) = Tr(X^T X + gamma I)^(p/2) (log-det for p = 0), whose gradient is
p * X (X^T X + gamma I)^(p/2 - 1). Following the usual convention for this
family, the solver uses X @ W with W = (X^T X + gamma I)^(p/2 - 1), i.e. the
constant factor p is absorbed into the step size. Tests against finite
differences account for that factor.
"""

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from . import kernels
from .linalg import as_matrix, singular_values, truncated_svd
from .sampling import max_rank_heuristic, project
from .seeding import make_rng

# sigma_i > RANK_CUTOFF * sigma_1 counts toward the per-iteration rank estimate
RANK_CUTOFF = 1e-2

_GAMMA_FLOOR = 1e-15

# underflow guard for geometric schedules at extreme iteration counts;
# (1/2)^k hits denormal zero near k = 1075
_GAMMA_HARD_FLOOR = 1e-300


def gamma_halving(k):
    """Default regularizer schedule gamma^k = (1/2)^k."""
    return 0.5 ** k


def eps_decay(k):
    """Default sparsity regularizer schedule eps^k = (9/10)^k."""
    return 0.9 ** k


def default_step(k, gamma, p):
    """Default low-rank step size s^k = (gamma^k)^(1 - p/2)."""
    return gamma ** (1.0 - 0.5 * p)


@dataclass
class LowRankConfig:
    """Parameters of the low-rank (gradient projection) part of the solvers.

    gamma_schedule is "halving" ((1/2)^k), "adaptive_sigma" (min-clamped
    square of the (r+1)-th singular value of the current iterate) or a
    callable k -> gamma. step_rule defaults to s^k = (gamma^k)^(1-p/2);
    a callable takes (k, gamma, p). steps_per_refresh is the number of
    gradient steps taken per weight refresh in the baseline solver.
    """

    p: float = 1.0
    gamma_schedule: Union[str, Callable] = "halving"
    step_rule: Optional[Callable] = None
    tol: float = 1e-5
    max_iter: int = 5000
    rank_input: Optional[int] = None
    steps_per_refresh: int = 1
    svd_oversample: int = 10
    svd_power_iters: int = 2
    exact_svd_threshold: int = 64
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1 or self.steps_per_refresh < 1:
            raise ValueError("max_iter and steps_per_refresh must be >= 1")
        if self.rank_input is not None and self.rank_input < 1:
            raise ValueError("rank_input must be >= 1 when given")


@dataclass
class SolveResult:
    """Solver output: final iterate plus per-outer-iteration traces."""

    X_hat: np.ndarray
    iterations: int
    converged: bool
    distance_trace: np.ndarray
    rank_trace: np.ndarray
    surrogate_trace: np.ndarray
    z_l1_trace: Optional[np.ndarray] = None

    def relative_distance(self):
        return float(self.distance_trace[-1]) if self.distance_trace.size else 0.0


def weight_matrix(X, gamma, p, r, rng=0, oversample=10, power_iters=2,
                  exact_threshold=64):
    """Explicit n x n weight matrix (X^T X + gamma I)^(p/2 - 1).

    Built from the rank-r truncated SVD; directions orthogonal to the leading
    right singular subspace get the sigma -> 0 limit value gamma^(p/2 - 1),
    which keeps the matrix symmetric positive definite at any truncation rank.
    """
    X = as_matrix(X)
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    n = X.shape[1]
    g0 = gamma ** (0.5 * p - 1.0)
    if not np.any(X):
        return g0 * np.eye(n)
    fac = truncated_svd(X, r, oversample=oversample, power_iters=power_iters,
                        rng=rng, exact_threshold=exact_threshold)
    c = (fac.sigma**2 + gamma) ** (0.5 * p - 1.0)
    W = (fac.V * (c - g0)) @ fac.V.T
    W[np.diag_indices_from(W)] += g0
    return (W + W.T) / 2.0


def schatten_surrogate(X, gamma, p):
    """Smooth rank surrogate: sum_i (sigma_i^2 + gamma)^(p/2) over the n
    eigenvalues of X^T X; sum of log(sigma_i^2 + gamma) for p = 0.

    Exact (dense SVD); meant for desk-scale checks and traces.
    """
    X = as_matrix(X)
    if gamma < 0 or (p == 0 and gamma == 0):
        raise ValueError("gamma must be positive (nonnegative for p > 0)")
    n = X.shape[1]
    s = singular_values(X)
    vals = np.concatenate([s**2, np.zeros(n - s.size)]) + gamma
    if p == 0:
        return float(np.log(vals).sum())
    return float((vals ** (0.5 * p)).sum())


def estimate_rank(X, mask, rank_input=None, rng=0, oversample=10,
                  power_iters=2, exact_threshold=64):
    """Per-iteration truncation rank.

    Returns `rank_input` unchanged when provided. Otherwise the largest r with
    sigma_r > 1e-2 sigma_1, capped by the observation-count heuristic
    ceil(n (1 - sqrt(1 - |Omega|/(m n)))). Returns 1 for the zero matrix.
    """
    X = as_matrix(X)
    if rank_input is not None:
        r = int(rank_input)
        if not 1 <= r <= min(X.shape):
            raise ValueError(f"rank_input={r} out of range")
        return r
    if not np.any(X):
        return 1
    r_cap = max_rank_heuristic(mask.rows, mask.cols, mask.n_observed)
    fac = truncated_svd(X, r_cap, oversample=oversample, power_iters=power_iters,
                        rng=rng, exact_threshold=exact_threshold)
    if fac.sigma[0] <= 0:
        return 1
    r_hat = int(np.count_nonzero(fac.sigma > RANK_CUTOFF * fac.sigma[0]))
    return max(1, r_hat)


def _xw_product(X, factors, gamma, p):
    """X @ W without forming W, using the truncated right singular basis."""
    g0 = gamma ** (0.5 * p - 1.0)
    if factors is None:
        return np.zeros_like(X)
    c = (factors.sigma**2 + gamma) ** (0.5 * p - 1.0)
    T = X @ factors.V
    G = (T * (c - g0)) @ factors.V.T
    G += g0 * X
    return np.ascontiguousarray(G)


def lowrank_step(X, mask, M_obs, gamma, s, p, r, rng=0, oversample=10,
                 power_iters=2, exact_threshold=64):
    """One projected gradient step on the rank surrogate.

    Missing entries move along -s * (X W); observed entries are reset to
    M_obs. The weight uses the rank-r truncated SVD of X.
    """
    X = as_matrix(X)
    M_obs = as_matrix(M_obs, "M_obs")
    if X.shape != mask.shape or M_obs.shape != mask.shape:
        raise ValueError("X, M_obs and mask shapes must agree")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    factors = None
    if np.any(X):
        factors = truncated_svd(X, r, oversample=oversample,
                                power_iters=power_iters, rng=rng,
                                exact_threshold=exact_threshold)
    G = _xw_product(X, factors, gamma, p)
    out = np.empty_like(X)
    kernels.masked_gradient_update(X, G, s, mask.observed_u8, M_obs, out)
    return out


def iterate_distance(X_new, X_prev):
    """d(X, X') = ||X - X'||_F / ||X||_F (0 when both terms vanish)."""
    diff = float(np.linalg.norm(X_new - X_prev))
    denom = float(np.linalg.norm(X_new))
    if denom == 0.0:
        return 0.0 if diff == 0.0 else np.inf
    return diff / denom


def _surrogate_estimate(sigma, n_total, gamma, p):
    """Surrogate value from truncated singular values (tail treated as zero)."""
    tail = n_total - sigma.size
    vals = sigma**2 + gamma
    if p == 0:
        return float(np.log(vals).sum() + tail * np.log(gamma))
    return float((vals ** (0.5 * p)).sum() + tail * gamma ** (0.5 * p))


class _IterationState:
    """Shared per-outer-iteration plumbing: rank estimate, truncated SVD,
    schedule evaluation. Used identically by the baseline and structured
    solvers so that the structured solver with the sparsity block disabled
    reproduces the baseline bit for bit."""

    def __init__(self, mask, cfg, rng):
        self.mask = mask
        self.cfg = cfg
        self.rng = rng
        self.adaptive_gamma = cfg.gamma_schedule == "adaptive_sigma"
        self.gamma_fn = None
        if not self.adaptive_gamma:
            if cfg.gamma_schedule == "halving":
                self.gamma_fn = gamma_halving
            elif callable(cfg.gamma_schedule):
                self.gamma_fn = cfg.gamma_schedule
            else:
                raise ValueError(f"unknown gamma_schedule {cfg.gamma_schedule!r}")
        self.gamma_prev = None
        self.r_cap = max_rank_heuristic(mask.rows, mask.cols, mask.n_observed)

    def refresh(self, X, k):
        """Return (factors, r_use, gamma, step) for outer iteration k."""
        cfg = self.cfg
        want_extra = 1 if self.adaptive_gamma else 0
        if cfg.rank_input is not None:
            r_use = min(int(cfg.rank_input), min(X.shape))
            r_svd = min(r_use + want_extra, min(X.shape))
        else:
            r_use = None
            r_svd = min(self.r_cap + want_extra, min(X.shape))
        factors = None
        if np.any(X):
            factors = truncated_svd(
                X, r_svd, oversample=cfg.svd_oversample,
                power_iters=cfg.svd_power_iters, rng=self.rng,
                exact_threshold=cfg.exact_svd_threshold)
        if r_use is None:
            if factors is None or factors.sigma[0] <= 0:
                r_use = 1
            else:
                cutoff = RANK_CUTOFF * factors.sigma[0]
                r_use = max(1, int(np.count_nonzero(
                    factors.sigma[:self.r_cap] > cutoff)))
        if self.adaptive_gamma:
            prev = 0.5 if self.gamma_prev is None else self.gamma_prev
            cand = prev
            if factors is not None and factors.sigma.size > r_use:
                cand = float(factors.sigma[r_use]) ** 2
            gamma = max(min(prev, cand), _GAMMA_FLOOR)
        else:
            gamma = float(self.gamma_fn(k))
        if gamma < 0:
            raise ValueError("gamma schedule produced a negative value")
        # gamma == 0.0 from geometric decay is floating underflow; floor it
        gamma = max(gamma, _GAMMA_HARD_FLOOR)
        if self.gamma_prev is not None and gamma > self.gamma_prev:
            raise ValueError("gamma schedule must be nonincreasing")
        self.gamma_prev = gamma
        if factors is not None and factors.sigma.size > r_use:
            factors = type(factors)(factors.U[:, :r_use],
                                    factors.sigma[:r_use],
                                    factors.V[:, :r_use])
        if cfg.step_rule is not None:
            step = float(cfg.step_rule(k, gamma, cfg.p))
        else:
            step = default_step(k, gamma, cfg.p)
        return factors, r_use, gamma, step


def _gradient_block(X, factors, gamma, step, p, n_steps, mask, M_obs, scratch):
    """n_steps projected gradient steps with a fixed weight basis and step size."""
    obs = mask.observed_u8
    for _ in range(n_steps):
        G = _xw_product(X, factors, gamma, p)
        kernels.masked_gradient_update(X, G, step, obs, M_obs, scratch)
        X, scratch = scratch, X
    return X, scratch


def solve_sirls(M_obs, mask, cfg=None):
    """Baseline completion: per outer iteration, refresh the truncated-SVD
    weight at the scheduled gamma^k and take cfg.steps_per_refresh projected
    gradient steps of size s^k. Stops when the relative change between outer
    iterates drops below cfg.tol.
    """
    cfg = cfg or LowRankConfig()
    M_obs = as_matrix(M_obs, "M_obs")
    if M_obs.shape != mask.shape:
        raise ValueError("M_obs and mask shapes must agree")
    if mask.n_observed == 0:
        raise ValueError("mask must observe at least one entry")

    rng = make_rng(cfg.seed)
    state = _IterationState(mask, cfg, rng)
    X = project(M_obs, mask)
    scratch = np.empty_like(X)
    n = X.shape[1]
    distances, ranks, surrogates = [], [], []
    converged = False
    k = 0
    for k in range(1, cfg.max_iter + 1):
        factors, r_use, gamma, step = state.refresh(X, k)
        X_prev = X.copy()
        X, scratch = _gradient_block(X, factors, gamma, step, cfg.p,
                                     cfg.steps_per_refresh, mask, M_obs, scratch)
        d = iterate_distance(X, X_prev)
        distances.append(d)
        ranks.append(r_use)
        sig = factors.sigma if factors is not None else np.zeros(0)
        surrogates.append(_surrogate_estimate(sig, n, gamma, cfg.p))
        if d < cfg.tol:
            converged = True
            break
    return SolveResult(X_hat=X, iterations=k, converged=converged,
                       distance_trace=np.asarray(distances),
                       rank_trace=np.asarray(ranks, dtype=np.int64),
                       surrogate_trace=np.asarray(surrogates))


def export_trace(result, path):
    """Write the per-iteration trace as CSV.

    Columns: iteration, distance, rank_estimate, surrogate_value, and z_l1
    when the solver recorded it (structured variant).
    """
    with_z = result.z_l1_trace is not None
    header = "iteration,distance,rank_estimate,surrogate_value"
    if with_z:
        header += ",z_l1"
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for i in range(result.distance_trace.size):
            row = (f"{i + 1},{float(result.distance_trace[i])!r},"
                   f"{int(result.rank_trace[i])},"
                   f"{float(result.surrogate_trace[i])!r}")
            if with_z:
                row += f",{float(result.z_l1_trace[i])!r}"
            fh.write(row + "\n")
