"""Structured completion: alternate reweighted sparsity steps on the missing
entries with reweighted low-rank gradient steps on the whole iterate.

Per outer iteration k (all schedules decaying in k):
  1. k_s sparsity steps  z <- z - c^k (w ⊙ z), with w from the previous
     outer iterate (all-ones initially);
  2. one truncated-SVD weight refresh at gamma^k, then k_l projected
     gradient steps of size s^k on the rank surrogate, observed entries
     reset each step;
  3. sparsity weight refresh w = (z^2 + eps^k)^(q/2 - 1) from the new iterate.

Convergence is measured between consecutive outer iterates. The sparsity
update implements the reweighted-l2 gradient step with the constant factor 2
absorbed into c^k (the true gradient of the weighted square norm is 2 w ⊙ z).
"""

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from . import kernels
from .linalg import as_matrix
from .sampling import project
from .seeding import make_rng
from .sirls import (LowRankConfig, SolveResult, _gradient_block,
                    _IterationState, _surrogate_estimate, eps_decay,
                    iterate_distance)

_EPS_FLOOR = 1e-15


def _default_lowrank():
    return LowRankConfig(max_iter=1000)


@dataclass
class StructuredConfig:
    """Parameters of the structured solver.

    c_rule is the sparsity step size: a constant (default 1e-6) or a callable
    k -> c. eps_schedule is "decay" ((9/10)^k), "adaptive_z" (min-clamped
    square of the (s+1)-th largest |z|, s = sparsity_guess) or a callable.
    mu_shift recenters data whose missing entries cluster near a nonzero
    constant: mu is subtracted from the observed entries before solving and
    added back to the output. nonneg thresholds the recovered missing entries
    at zero as a final step.
    """

    lowrank: LowRankConfig = field(default_factory=_default_lowrank)
    q: float = 1.0
    k_s: int = 1
    k_l: int = 10
    c_rule: Union[float, Callable] = 1e-6
    eps_schedule: Union[str, Callable] = "decay"
    nonneg: bool = False
    mu_shift: float = 0.0
    sparsity_guess: Optional[int] = None

    def __post_init__(self):
        if not 0.0 <= self.q <= 1.0:
            raise ValueError(f"q must lie in [0, 1], got {self.q}")
        if self.k_s < 0 or self.k_l < 1:
            raise ValueError("need k_s >= 0 and k_l >= 1")
        if not callable(self.c_rule) and self.c_rule < 0:
            raise ValueError("constant c_rule must be nonnegative")


def sparsity_weights(z, eps, q):
    """Reweighted-l2 sparsity weights (z^2 + eps)^(q/2 - 1), elementwise."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    z = np.asarray(z, dtype=np.float64)
    return (z * z + eps) ** (0.5 * q - 1.0)


def sparsity_step(z, w, c):
    """One reweighted gradient step toward zero: z - c (w ⊙ z)."""
    z = np.asarray(z, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if z.shape != w.shape:
        raise ValueError(f"z and w lengths differ: {z.shape} vs {w.shape}")
    if c < 0:
        raise ValueError("c must be nonnegative")
    return z - c * (w * z)


def nonneg_threshold(z):
    """Elementwise max(z, 0)."""
    return np.maximum(np.asarray(z, dtype=np.float64), 0.0)


def _resolve_eps(schedule):
    """Return (eps_fn or None, adaptive_flag)."""
    if schedule == "adaptive_z":
        return None, True
    if schedule == "decay":
        return eps_decay, False
    if callable(schedule):
        return schedule, False
    raise ValueError(f"unknown eps_schedule {schedule!r}")


def solve_structured_sirls(M_obs, mask, cfg=None):
    """Run the alternating sparsity/low-rank solver.

    Observed entries of the output equal M_obs on the mask exactly; only
    missing entries are ever moved. Setting cfg.k_s = 0 disables the sparsity
    block and reproduces the baseline solver with k_l steps per refresh.
    """
    cfg = cfg or StructuredConfig()
    lr = cfg.lowrank
    M_obs = as_matrix(M_obs, "M_obs")
    if M_obs.shape != mask.shape:
        raise ValueError("M_obs and mask shapes must agree")
    if mask.n_observed == 0:
        raise ValueError("mask must observe at least one entry")

    work = M_obs if cfg.mu_shift == 0.0 else M_obs - cfg.mu_shift
    rng = make_rng(lr.seed)
    state = _IterationState(mask, lr, rng)
    eps_fn, adaptive_eps = _resolve_eps(cfg.eps_schedule)
    c_fn = cfg.c_rule if callable(cfg.c_rule) else (lambda k, c0=cfg.c_rule: c0)

    X = project(work, mask)
    scratch = np.empty_like(X)
    miss = mask.missing_flat()
    n = X.shape[1]
    w = np.ones(miss.size)
    w_scratch = np.empty(miss.size)
    eps_prev = None
    s_guess = cfg.sparsity_guess
    if s_guess is None:
        s_guess = max(1, -(-miss.size // 10))  # ceil(|missing| / 10)

    distances, ranks, surrogates, z_l1 = [], [], [], []
    converged = False
    k = 0
    for k in range(1, lr.max_iter + 1):
        X_prev = X.copy()

        c_k = float(c_fn(k))
        for _ in range(cfg.k_s):
            kernels.sparsity_step_inplace(X.ravel(), miss, w, c_k)

        factors, r_use, gamma, step = state.refresh(X, k)
        X, scratch = _gradient_block(X, factors, gamma, step, lr.p,
                                     cfg.k_l, mask, work, scratch)

        if adaptive_eps:
            prev = 0.9 if eps_prev is None else eps_prev
            cand = prev
            if miss.size > s_guess:
                z_abs = np.abs(X.ravel()[miss])
                # (s+1)-th largest |z|, squared to match the z^2 + eps scale
                cand = float(np.partition(z_abs, -(s_guess + 1))[-(s_guess + 1)]) ** 2
            eps_k = max(min(prev, cand), _EPS_FLOOR)
        else:
            eps_k = float(eps_fn(k))
        if eps_k < 0:
            raise ValueError("eps schedule produced a negative value")
        # eps == 0.0 from geometric decay is floating underflow; floor it
        eps_k = max(eps_k, _EPS_FLOOR)
        if eps_prev is not None and eps_k > eps_prev:
            raise ValueError("eps schedule must be nonincreasing")
        eps_prev = eps_k
        kernels.sparsity_weights_flat(X.ravel(), miss, eps_k, cfg.q, w_scratch)
        w, w_scratch = w_scratch, w

        d = iterate_distance(X, X_prev)
        distances.append(d)
        ranks.append(r_use)
        sig = factors.sigma if factors is not None else np.zeros(0)
        surrogates.append(_surrogate_estimate(sig, n, gamma, lr.p))
        z_l1.append(kernels.abs_sum_flat(X.ravel(), miss))
        if d < lr.tol:
            converged = True
            break

    if cfg.nonneg:
        X.ravel()[miss] = np.maximum(X.ravel()[miss], 0.0)
    if cfg.mu_shift != 0.0:
        X = X + cfg.mu_shift
    return SolveResult(X_hat=X, iterations=k, converged=converged,
                       distance_trace=np.asarray(distances),
                       rank_trace=np.asarray(ranks, dtype=np.int64),
                       surrogate_trace=np.asarray(surrogates),
                       z_l1_trace=np.asarray(z_l1))
