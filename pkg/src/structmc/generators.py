"""Synthetic problem generators: sparse low-rank products, normalization, noise."""

from dataclasses import dataclass

import numpy as np

from .linalg import as_matrix, truncated_svd
from .sampling import ObservationMask
from .seeding import make_rng


@dataclass
class GeneratorSpec:
    """Sparse low-rank product M = M_L @ M_R.

    Factor entries are zero with the class probability (left 0.7, right 0.5 by
    default), otherwise Uniform(0, 1).
    """

    m: int
    n: int
    r: int
    zero_frac_left: float = 0.7
    zero_frac_right: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.r < 1 or self.r > min(self.m, self.n):
            raise ValueError(f"rank r={self.r} must be in [1, {min(self.m, self.n)}]")
        for name in ("zero_frac_left", "zero_frac_right"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")


@dataclass
class NoiseSpec:
    """Observed-entry Gaussian noise scaled to epsilon * ||P_Omega(M)||_F."""

    epsilon: float
    seed: int = 0

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")


def gen_low_rank_sparse(spec):
    """Draw M = M_L @ M_R per `spec`. Entrywise nonnegative, rank <= spec.r.

    Draw order (fixed for reproducibility): left values, left zero pattern,
    right values, right zero pattern.
    """
    gen = make_rng(spec.seed)
    ML = gen.random((spec.m, spec.r))
    ML[gen.random((spec.m, spec.r)) < spec.zero_frac_left] = 0.0
    MR = gen.random((spec.r, spec.n))
    MR[gen.random((spec.r, spec.n)) < spec.zero_frac_right] = 0.0
    return ML @ MR


def density(M, tol=0.0):
    """Fraction of entries with |m_ij| > tol."""
    M = as_matrix(M)
    return float(np.count_nonzero(np.abs(M) > tol)) / M.size


def normalize_spectral(M, rng=0):
    """M scaled to spectral norm 1.

    sigma_1 comes from the rank-1 truncated SVD (exact below the dense-SVD
    threshold, randomized with power iterations above it). Raises ValueError
    for the zero matrix.
    """
    M = as_matrix(M)
    if not np.any(M):
        raise ValueError("cannot normalize the zero matrix")
    sigma1 = truncated_svd(M, 1, rng=rng).sigma[0]
    return M / sigma1


def add_noise(M, mask, noise):
    """Perturb the observed entries of M so that the observed perturbation has
    Frobenius norm exactly epsilon * ||P_Omega(M)||_F.

    Gaussian draws are made only on the observed entries (row-major order);
    unobserved entries of the result equal those of M. With epsilon = 0 the
    matrix is returned unchanged (as a copy).
    """
    M = as_matrix(M)
    if not isinstance(mask, ObservationMask) or M.shape != mask.shape:
        raise ValueError("mask must be an ObservationMask matching M's shape")
    if noise.epsilon == 0.0:
        return M.copy()
    if mask.n_observed == 0:
        raise ValueError("cannot add observed-entry noise with an empty mask")
    gen = make_rng(noise.seed)
    draws = gen.standard_normal(mask.n_observed)
    obs_flat = mask.observed_flat()
    m_obs_norm = np.linalg.norm(M.ravel()[obs_flat])
    draws_norm = np.linalg.norm(draws)
    scale = noise.epsilon * m_obs_norm / draws_norm
    B = M.copy()
    B.ravel()[obs_flat] += scale * draws
    return B
