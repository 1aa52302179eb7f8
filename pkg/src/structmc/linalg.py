"""Dense matrix utilities: validation, norms, truncated SVD, text I/O.

Matrices are plain 2-D float64 C-contiguous numpy arrays throughout the
package ("dense matrix" below always means that). :func:`as_matrix` is the
single validation chokepoint: finite entries, two dimensions, float64,
row-major.
"""

import warnings
from typing import NamedTuple

import numpy as np

from .seeding import make_rng

# Below this dimension the truncated SVD falls back to an exact dense SVD.
EXACT_SVD_THRESHOLD = 64


def as_matrix(a, name="matrix"):
    """Validate and return `a` as a 2-D float64 C-contiguous array.

    Raises ValueError on wrong dimensionality or non-finite entries.
    """
    X = np.ascontiguousarray(a, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains NaN or Inf entries")
    return X


class SvdFactors(NamedTuple):
    """Truncated SVD: U (m,k) and V (n,k) orthonormal-column, sigma (k,) nonincreasing."""

    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray

    @property
    def k(self):
        return self.sigma.size

    def reconstruct(self):
        """U @ diag(sigma) @ V.T"""
        return (self.U * self.sigma) @ self.V.T


def frobenius_norm(X):
    """sqrt of the sum of squared entries (equals sqrt of the sum of squared singular values)."""
    X = as_matrix(X)
    return float(np.linalg.norm(X, "fro"))


def spectral_norm(X, tol=1e-10, max_iter=1000, rng=0):
    """Largest singular value, by power iteration on X^T X.

    Deterministic for a given `rng` seed (default 0). Returns 0 for the zero
    matrix. If the iteration has not met `tol` (relative change of the
    estimate) within `max_iter`, the best estimate is returned with a
    RuntimeWarning.
    """
    X = as_matrix(X)
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not np.any(X):
        return 0.0
    gen = make_rng(rng)
    v = gen.standard_normal(X.shape[1])
    nv = np.linalg.norm(v)
    if nv == 0.0:  # pragma: no cover - measure zero
        v = np.ones(X.shape[1])
        nv = np.sqrt(X.shape[1])
    v /= nv
    sigma = 0.0
    for _ in range(max_iter):
        u = X @ v
        w = X.T @ u
        nw = np.linalg.norm(w)
        if nw == 0.0:
            # v landed in the null space; restart from a fresh direction
            v = gen.standard_normal(X.shape[1])
            v /= np.linalg.norm(v)
            continue
        sigma_new = np.sqrt(nw)  # ||X^T X v|| -> sigma^2 at convergence
        v = w / nw
        if abs(sigma_new - sigma) <= tol * sigma_new:
            return float(sigma_new)
        sigma = sigma_new
    warnings.warn(
        f"power iteration did not converge in {max_iter} iterations "
        f"(last estimate {sigma:.6g})",
        RuntimeWarning,
    )
    return float(sigma)


def truncated_svd(X, r, oversample=10, power_iters=2, rng=0,
                  exact_threshold=EXACT_SVD_THRESHOLD):
    """Rank-r truncated SVD.

    Exact dense SVD (truncated to r) when min(m, n) <= exact_threshold,
    otherwise the randomized range-finder with Gaussian test matrix,
    `oversample` extra columns and `power_iters` orthonormalized power
    iterations. Deterministic for a given `rng` seed.
    """
    X = as_matrix(X)
    m, n = X.shape
    r = int(r)
    if not 1 <= r <= min(m, n):
        raise ValueError(f"rank r={r} must be in [1, {min(m, n)}]")

    if min(m, n) <= exact_threshold:
        U, s, Vt = np.linalg.svd(X, full_matrices=False)
        return SvdFactors(np.ascontiguousarray(U[:, :r]), s[:r].copy(),
                          np.ascontiguousarray(Vt[:r].T))

    gen = make_rng(rng)
    ell = min(r + int(oversample), min(m, n))
    Y = X @ gen.standard_normal((n, ell))
    Q, _ = np.linalg.qr(Y)
    for _ in range(int(power_iters)):
        Z, _ = np.linalg.qr(X.T @ Q)
        Q, _ = np.linalg.qr(X @ Z)
    B = Q.T @ X
    Ub, s, Vt = np.linalg.svd(B, full_matrices=False)
    U = Q @ Ub[:, :r]
    return SvdFactors(np.ascontiguousarray(U), s[:r].copy(),
                      np.ascontiguousarray(Vt[:r].T))


def singular_values(X):
    """All singular values of X, nonincreasing (exact dense SVD)."""
    return np.linalg.svd(as_matrix(X), compute_uv=False)


# ---------------------------------------------------------------------------
# text I/O
# ---------------------------------------------------------------------------

def write_dense(X, path):
    """Write a matrix as plain text: first line 'rows cols', then one row per line."""
    X = as_matrix(X)
    with open(path, "w") as fh:
        fh.write(f"{X.shape[0]} {X.shape[1]}\n")
        for row in X:
            fh.write(" ".join(f"{v:.17g}" for v in row))
            fh.write("\n")


def read_dense(path):
    """Read a matrix written by :func:`write_dense`."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}: expected 'rows cols' header")
        m, n = int(header[0]), int(header[1])
        data = np.loadtxt(fh, ndmin=2)
    if data.shape != (m, n):
        raise ValueError(f"{path}: header says {m}x{n}, data is {data.shape}")
    return as_matrix(data)


def write_triplets(X, path):
    """Write the nonzero entries of X as 'i,j,value' lines (0-indexed)."""
    X = as_matrix(X)
    ii, jj = np.nonzero(X)
    with open(path, "w") as fh:
        for i, j in zip(ii, jj):
            fh.write(f"{i},{j},{X[i, j]:.17g}\n")


def read_triplets(path, shape=None):
    """Read 'i,j,value' lines into a dense matrix.

    Without `shape` the dimensions are inferred as max index + 1 (trailing
    all-zero rows/columns are then lost).
    """
    triples = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            i, j, v = line.split(",")
            triples.append((int(i), int(j), float(v)))
    if shape is None:
        if not triples:
            raise ValueError(f"{path}: empty triplet file needs an explicit shape")
        shape = (max(t[0] for t in triples) + 1, max(t[1] for t in triples) + 1)
    X = np.zeros(shape)
    for i, j, v in triples:
        if not (0 <= i < shape[0] and 0 <= j < shape[1]):
            raise ValueError(f"{path}: index ({i},{j}) out of bounds for {shape}")
        X[i, j] = v
    return X
