"""Exact desk-scale solvers.

Two routes, both guarded to small problems (m * n <= 10^4):

* the reweighted quadratic program solved exactly per iteration (the
  per-column linear systems decouple because the weighted objective
  separates over columns), optionally with the sparsity penalty on missing
  entries; alpha = 0 gives the plain reweighted least squares iteration;
* nuclear-norm completion with an l1 or squared-l2 penalty on the missing
  entries, via ADMM (singular-value soft-thresholding / elementwise prox /
  exact reset on the observed set / dual update).
"""

import warnings
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .linalg import as_matrix
from .sampling import gather_missing, project
from .sirls import SolveResult, eps_decay, gamma_halving, iterate_distance

SIZE_GUARD = 10_000

# The geometric regularizer schedules are floored inside the exact loop: the
# per-column systems inherit the weight matrix's conditioning (~gamma^(-1/2)
# for p=1), so letting gamma decay below ~1e-12 only trades no accuracy for a
# failing Cholesky factorization.
SCHEDULE_FLOOR = 1e-12


@dataclass
class ExactIrlsConfig:
    """Exact reweighted-least-squares loop parameters.

    alpha = 0 drops the sparsity penalty (plain reweighted least squares).
    """

    p: float = 1.0
    q: float = 1.0
    alpha: float = 1.0
    gamma_schedule: Union[str, Callable] = "halving"
    eps_schedule: Union[str, Callable] = "decay"
    tol: float = 1e-6
    max_iter: int = 200

    def __post_init__(self):
        if not (0.0 <= self.p <= 1.0 and 0.0 <= self.q <= 1.0):
            raise ValueError("p and q must lie in [0, 1]")
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if self.tol <= 0 or self.max_iter < 1:
            raise ValueError("tol must be positive and max_iter >= 1")


@dataclass
class NnmConfig:
    """Nuclear-norm completion with a missing-entry penalty.

    penalty_norm 'l1' soft-thresholds the missing entries, 'l2' shrinks them
    (ridge). rho is the ADMM splitting penalty.
    """

    alpha: float = 0.0
    penalty_norm: str = "l1"
    rho: float = 1.0
    tol: float = 1e-6
    max_iter: int = 2000

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if self.penalty_norm not in ("l1", "l2"):
            raise ValueError("penalty_norm must be 'l1' or 'l2'")
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        if self.tol <= 0 or self.max_iter < 1:
            raise ValueError("tol must be positive and max_iter >= 1")


def _check_guard(mask):
    if mask.rows * mask.cols > SIZE_GUARD:
        raise ValueError(
            f"exact solvers are guarded to m*n <= {SIZE_GUARD} entries; "
            f"got {mask.rows}x{mask.cols}")


def structured_irls_iteration(M_obs, mask, W, w, alpha):
    """Exact minimizer of ||W^(1/2) X||_F^2 + alpha * sum_i w_i z_i(X)^2
    subject to X = M_obs on the observed entries.

    W is the m x m symmetric positive definite row-space weight; w holds one
    positive weight per missing entry in the global row-major missing order.
    The objective separates over columns: column j's missing block solves
    (W_mm + alpha D_j) x_m = -W_mo x_o with D_j = diag of w restricted to
    that column.
    """
    M_obs = as_matrix(M_obs, "M_obs")
    if M_obs.shape != mask.shape:
        raise ValueError("M_obs and mask shapes must agree")
    _check_guard(mask)
    m, n = M_obs.shape
    W = as_matrix(W, "W")
    if W.shape != (m, m):
        raise ValueError(f"W must be {m}x{m}, got {W.shape}")
    if not np.allclose(W, W.T, atol=1e-10):
        raise ValueError("W must be symmetric")
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (mask.n_missing,):
        raise ValueError(f"w must have one weight per missing entry "
                         f"({mask.n_missing}), got {w.shape}")
    if np.any(w <= 0):
        raise ValueError("missing-entry weights must be positive")
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")

    # position of each missing entry inside w (row-major missing order)
    w_pos = np.full(m * n, -1, dtype=np.int64)
    w_pos[mask.missing_flat()] = np.arange(mask.n_missing)

    X = project(M_obs, mask)
    obs = mask.observed
    for j in range(n):
        miss_j = np.flatnonzero(~obs[:, j])
        if miss_j.size == 0:
            continue
        obs_j = np.flatnonzero(obs[:, j])
        A = W[np.ix_(miss_j, miss_j)].copy()
        if alpha > 0:
            wj = w[w_pos[miss_j * n + j]]
            A[np.diag_indices_from(A)] += alpha * wj
        if obs_j.size:
            b = -W[np.ix_(miss_j, obs_j)] @ M_obs[obs_j, j]
        else:
            b = np.zeros(miss_j.size)
        X[miss_j, j] = cho_solve(cho_factor(A), b)
    return X


def _left_weight(X, gamma, p):
    """Exact m x m weight (X X^T + gamma I)^(p/2 - 1), by eigendecomposition."""
    S = X @ X.T
    vals, vecs = np.linalg.eigh(S)
    vals = np.clip(vals, 0.0, None) + gamma
    return (vecs * vals ** (0.5 * p - 1.0)) @ vecs.T


def solve_structured_irls_exact(M_obs, mask, cfg=None):
    """Full exact reweighted loop: solve the quadratic program, refresh the
    row-space weight (X X^T + gamma^k I)^(p/2-1) and the sparsity weights
    (z^2 + eps^k)^(q/2-1), decay the regularizers, repeat until the relative
    change between iterates drops below cfg.tol.
    """
    cfg = cfg or ExactIrlsConfig()
    M_obs = as_matrix(M_obs, "M_obs")
    if M_obs.shape != mask.shape:
        raise ValueError("M_obs and mask shapes must agree")
    if mask.n_observed == 0:
        raise ValueError("mask must observe at least one entry")
    _check_guard(mask)

    gamma_fn = gamma_halving if cfg.gamma_schedule == "halving" else cfg.gamma_schedule
    eps_fn = eps_decay if cfg.eps_schedule == "decay" else cfg.eps_schedule
    if not (callable(gamma_fn) and callable(eps_fn)):
        raise ValueError("schedules must be 'halving'/'decay' or callables")

    m = M_obs.shape[0]
    X = project(M_obs, mask)
    W = np.eye(m)
    w = np.ones(mask.n_missing)
    distances = []
    converged = False
    k = 0
    for k in range(1, cfg.max_iter + 1):
        X_new = structured_irls_iteration(M_obs, mask, W, w, cfg.alpha)
        gamma = float(gamma_fn(k))
        eps = float(eps_fn(k))
        if gamma <= 0 or eps <= 0:
            raise ValueError("schedules must stay positive")
        gamma = max(gamma, SCHEDULE_FLOOR)
        eps = max(eps, SCHEDULE_FLOOR)
        W = _left_weight(X_new, gamma, cfg.p)
        z = gather_missing(X_new, mask)
        w = (z * z + eps) ** (0.5 * cfg.q - 1.0)
        d = iterate_distance(X_new, X)
        distances.append(d)
        X = X_new
        # the k=1 solve with identity weights reproduces the initialization
        # exactly, so the distance test only counts from the second iteration
        if d < cfg.tol and k >= 2:
            converged = True
            break
    dist = np.asarray(distances)
    return SolveResult(X_hat=X, iterations=k, converged=converged,
                       distance_trace=dist,
                       rank_trace=np.zeros(dist.size, dtype=np.int64),
                       surrogate_trace=np.zeros(dist.size))


def remark_check(M, mask, W, w, alpha):
    """One exact iteration with and without the missing-entry penalty, same
    weights, on data whose missing entries are exactly zero.

    Returns (err_structured, err_plain), the Frobenius distances to M. With
    the penalty active the structured error never exceeds the plain one.
    """
    M = as_matrix(M)
    z = gather_missing(M, mask)
    if np.any(z != 0.0):
        raise ValueError("remark_check requires all missing entries of M to be zero")
    X_structured = structured_irls_iteration(M, mask, W, w, alpha)
    X_plain = structured_irls_iteration(M, mask, W, w, 0.0)
    err_structured = float(np.linalg.norm(M - X_structured))
    err_plain = float(np.linalg.norm(M - X_plain))
    return err_structured, err_plain


def _svt(A, tau):
    """Singular value soft-thresholding prox."""
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    s = np.maximum(s - tau, 0.0)
    keep = s > 0
    return (U[:, keep] * s[keep]) @ Vt[keep]


def _nnm_objective(X, miss_flat, alpha, penalty_norm):
    s = np.linalg.svd(X, compute_uv=False)
    obj = float(s.sum())
    if alpha > 0:
        z = X.ravel()[miss_flat]
        if penalty_norm == "l1":
            obj += alpha * float(np.abs(z).sum())
        else:
            obj += alpha * float((z * z).sum())
    return obj


def solve_structured_nnm(M_obs, mask, cfg=None, full_output=False):
    """Nuclear-norm completion with an optional penalty on missing entries.

    minimize ||X||_* + alpha * pen(missing entries of X)
    subject to X = M_obs on the observed entries,

    pen the l1 norm or the squared l2 norm per cfg.penalty_norm, solved by
    ADMM. Returns the best-objective iterate, projected so its observed
    entries equal M_obs exactly; alpha = 0 is plain nuclear-norm completion.
    With full_output=True returns (X, info) where info carries the
    best-objective trace and convergence data.
    """
    cfg = cfg or NnmConfig()
    M_obs = as_matrix(M_obs, "M_obs")
    if M_obs.shape != mask.shape:
        raise ValueError("M_obs and mask shapes must agree")
    if mask.n_observed == 0:
        raise ValueError("mask must observe at least one entry")
    _check_guard(mask)

    rho = cfg.rho
    obs = mask.observed
    miss_flat = mask.missing_flat()
    Y = project(M_obs, mask)
    U = np.zeros_like(Y)
    best_X, best_obj = Y.copy(), _nnm_objective(Y, miss_flat, cfg.alpha,
                                                cfg.penalty_norm)
    obj_trace = [best_obj]
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        X = _svt(Y - U, 1.0 / rho)
        V = X + U
        if cfg.penalty_norm == "l1":
            z = V.ravel()[miss_flat]
            z = np.sign(z) * np.maximum(np.abs(z) - cfg.alpha / rho, 0.0)
        else:
            z = V.ravel()[miss_flat] * (rho / (rho + 2.0 * cfg.alpha))
        Y_new = np.where(obs, M_obs, 0.0)
        Y_new.ravel()[miss_flat] = z
        primal = float(np.linalg.norm(X - Y_new))
        dual = rho * float(np.linalg.norm(Y_new - Y))
        U += X - Y_new
        Y = Y_new

        proj = np.where(obs, M_obs, X)
        obj = _nnm_objective(proj, miss_flat, cfg.alpha, cfg.penalty_norm)
        if obj < best_obj:
            best_obj, best_X = obj, proj
        obj_trace.append(best_obj)

        scale = max(1.0, float(np.linalg.norm(X)), float(np.linalg.norm(Y)))
        if primal <= cfg.tol * scale and dual <= cfg.tol * scale:
            converged = True
            break
    if not converged:
        warnings.warn(
            f"ADMM did not meet tol={cfg.tol} in {cfg.max_iter} iterations; "
            "returning the best iterate", RuntimeWarning)
    if full_output:
        info = {"iterations": it, "converged": converged,
                "objective": best_obj,
                "objective_trace": np.asarray(obj_trace)}
        return best_X, info
    return best_X
