"""Observation masks, the entrywise sampling projection, and structured subsampling.

The mask fixes a global ordering contract: missing entries are always
enumerated in row-major order, so the vector of missing entries z(X) and any
weight vector over it stay aligned across modules.
"""

import math

import numpy as np

from .linalg import as_matrix
from .seeding import make_rng


class ObservationMask:
    """Set of observed (i, j) positions of an m x n matrix.

    Immutable once constructed; cached index arrays are derived lazily.
    """

    def __init__(self, observed):
        obs = np.asarray(observed)
        if obs.ndim != 2:
            raise ValueError("observed must be a 2-D boolean array")
        self._obs = np.ascontiguousarray(obs, dtype=bool)
        self._obs.setflags(write=False)
        self._obs_u8 = None
        self._obs_flat = None
        self._miss_flat = None

    @classmethod
    def from_pairs(cls, rows, cols, pairs):
        """Build from an iterable of (i, j) index pairs. Rejects out-of-bounds and duplicates."""
        rows, cols = int(rows), int(cols)
        obs = np.zeros((rows, cols), dtype=bool)
        for i, j in pairs:
            if not (0 <= i < rows and 0 <= j < cols):
                raise ValueError(f"index ({i},{j}) out of bounds for {rows}x{cols}")
            if obs[i, j]:
                raise ValueError(f"duplicate index pair ({i},{j})")
            obs[i, j] = True
        return cls(obs)

    @classmethod
    def full(cls, rows, cols):
        return cls(np.ones((rows, cols), dtype=bool))

    @classmethod
    def empty(cls, rows, cols):
        return cls(np.zeros((rows, cols), dtype=bool))

    @property
    def rows(self):
        return self._obs.shape[0]

    @property
    def cols(self):
        return self._obs.shape[1]

    @property
    def shape(self):
        return self._obs.shape

    @property
    def observed(self):
        """Boolean (rows, cols) array; True where observed."""
        return self._obs

    @property
    def observed_u8(self):
        """uint8 view of `observed` for the compiled kernels."""
        if self._obs_u8 is None:
            self._obs_u8 = np.ascontiguousarray(self._obs.view(np.uint8))
        return self._obs_u8

    @property
    def n_observed(self):
        return int(self._obs.sum())

    @property
    def n_missing(self):
        return self._obs.size - self.n_observed

    def observed_flat(self):
        """int64 flat (row-major) indices of observed entries, ascending."""
        if self._obs_flat is None:
            self._obs_flat = np.flatnonzero(self._obs.ravel()).astype(np.int64)
        return self._obs_flat

    def missing_flat(self):
        """int64 flat (row-major) indices of missing entries, ascending."""
        if self._miss_flat is None:
            self._miss_flat = np.flatnonzero(~self._obs.ravel()).astype(np.int64)
        return self._miss_flat

    def missing_pairs(self):
        """(i, j) arrays of the missing entries, in the global row-major order."""
        flat = self.missing_flat()
        return np.divmod(flat, self.cols)

    def observed_pairs(self):
        flat = self.observed_flat()
        return np.divmod(flat, self.cols)

    def complement(self):
        return ObservationMask(~self._obs)

    def __eq__(self, other):
        return isinstance(other, ObservationMask) and np.array_equal(self._obs, other._obs)

    def __repr__(self):
        return (f"ObservationMask({self.rows}x{self.cols}, "
                f"{self.n_observed}/{self._obs.size} observed)")

    def save_csv(self, path):
        """Write 'rows,cols' on the first line, then one 'i,j' line per observed entry."""
        ii, jj = self.observed_pairs()
        with open(path, "w") as fh:
            fh.write(f"{self.rows},{self.cols}\n")
            for i, j in zip(ii, jj):
                fh.write(f"{i},{j}\n")

    @classmethod
    def load_csv(cls, path):
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            if len(header) != 2:
                raise ValueError(f"{path}: expected 'rows,cols' header line")
            rows, cols = int(header[0]), int(header[1])
            pairs = []
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                i, j = line.split(",")
                pairs.append((int(i), int(j)))
        return cls.from_pairs(rows, cols, pairs)


def _check_shape(X, mask):
    if X.shape != mask.shape:
        raise ValueError(f"matrix shape {X.shape} != mask shape {mask.shape}")


def project(X, mask):
    """Entrywise sampling projection: X on observed entries, 0 elsewhere."""
    X = as_matrix(X)
    _check_shape(X, mask)
    return np.where(mask.observed, X, 0.0)


def gather_missing(X, mask):
    """Vector of the missing entries of X, in row-major order over the missing set."""
    X = as_matrix(X)
    _check_shape(X, mask)
    return X.ravel()[mask.missing_flat()]


def scatter_missing(z, X, mask):
    """Copy of X with its missing entries replaced by z (observed entries untouched)."""
    X = as_matrix(X)
    _check_shape(X, mask)
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (mask.n_missing,):
        raise ValueError(f"expected {mask.n_missing} missing values, got {z.shape}")
    out = X.copy()
    out.ravel()[mask.missing_flat()] = z
    return out


def structured_sample(M, rate_zero, rate_nonzero, zero_tol=0.0, rng=0,
                      exact_counts=False):
    """Subsample entries of M by value class.

    Entries with \\|m_ij\\| <= zero_tol are observed with probability
    `rate_zero`, all others with probability `rate_nonzero` (independent
    Bernoulli draws). With `exact_counts` each class instead contributes
    exactly round(rate * class size) entries, chosen uniformly without
    replacement. Deterministic for a given seed.
    """
    M = as_matrix(M)
    for name, rate in (("rate_zero", rate_zero), ("rate_nonzero", rate_nonzero)):
        if not 0.0 <= rate <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {rate}")
    gen = make_rng(rng)
    is_zero = np.abs(M) <= zero_tol
    if exact_counts:
        obs = np.zeros(M.size, dtype=bool)
        for cls, rate in ((is_zero.ravel(), rate_zero), (~is_zero.ravel(), rate_nonzero)):
            idx = np.flatnonzero(cls)
            k = int(round(rate * idx.size))
            if k > 0:
                obs[gen.permutation(idx)[:k]] = True
        obs = obs.reshape(M.shape)
    else:
        U = gen.random(M.shape)
        obs = np.where(is_zero, U < rate_zero, U < rate_nonzero)
    return ObservationMask(obs)


def degrees_of_freedom_ratio(m, n, r, observed):
    """r (m + n - r) / observed: degrees of freedom per observation; > 0.4 is 'hard'."""
    m, n, r, observed = int(m), int(n), int(r), int(observed)
    if observed < 1:
        raise ValueError("observed count must be >= 1")
    if r < 0 or r > min(m, n):
        raise ValueError(f"rank r={r} must be in [0, {min(m, n)}]")
    return r * (m + n - r) / observed


def max_rank_heuristic(m, n, observed):
    """ceil(n (1 - sqrt(1 - |Omega|/(m n)))), clamped to [1, min(m, n)].

    Upper bound on recoverable rank given the observation count.
    """
    frac = observed / (m * n)
    frac = min(max(frac, 0.0), 1.0)
    r_max = math.ceil(n * (1.0 - math.sqrt(1.0 - frac)))
    return max(1, min(r_max, min(m, n)))
