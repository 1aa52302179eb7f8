# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: fused masked updates on matrix iterates.

Pure-numpy twins live in ``structmc._core_py``; keep both in sync.
"""

from libc.math cimport sqrt, pow, fabs


def masked_gradient_update(const double[:, ::1] X, const double[:, ::1] G, double s,
                           const unsigned char[:, ::1] obs, const double[:, ::1] M_obs,
                           double[:, ::1] out):
    """out = X - s*G on unobserved entries, = M_obs on observed ones."""
    cdef Py_ssize_t i, j
    cdef Py_ssize_t m = X.shape[0], n = X.shape[1]
    for i in range(m):
        for j in range(n):
            if obs[i, j]:
                out[i, j] = M_obs[i, j]
            else:
                out[i, j] = X[i, j] - s * G[i, j]
    return out.base


def sparsity_step_inplace(double[::1] x_flat, const long long[::1] idx,
                          const double[::1] w, double c):
    """x[idx] -= c * w * x[idx] (one reweighted gradient step on the missing entries)."""
    cdef Py_ssize_t t
    cdef Py_ssize_t nmiss = idx.shape[0]
    cdef long long k
    for t in range(nmiss):
        k = idx[t]
        x_flat[k] -= c * w[t] * x_flat[k]


def sparsity_weights_flat(const double[::1] x_flat, const long long[::1] idx,
                          double eps, double q, double[::1] out):
    """out = (x[idx]^2 + eps)^(q/2 - 1)."""
    cdef Py_ssize_t t
    cdef Py_ssize_t nmiss = idx.shape[0]
    cdef double v, e = 0.5 * q - 1.0
    if q == 1.0:
        for t in range(nmiss):
            v = x_flat[idx[t]]
            out[t] = 1.0 / sqrt(v * v + eps)
    elif q == 0.0:
        for t in range(nmiss):
            v = x_flat[idx[t]]
            out[t] = 1.0 / (v * v + eps)
    else:
        for t in range(nmiss):
            v = x_flat[idx[t]]
            out[t] = pow(v * v + eps, e)
    return out.base


def abs_sum_flat(const double[::1] x_flat, const long long[::1] idx):
    """l1 norm of the entries at idx."""
    cdef Py_ssize_t t
    cdef Py_ssize_t nmiss = idx.shape[0]
    cdef double acc = 0.0
    for t in range(nmiss):
        acc += fabs(x_flat[idx[t]])
    return acc
