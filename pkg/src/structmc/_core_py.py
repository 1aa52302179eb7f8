"""Pure-numpy implementations of the hot solver kernels.

Mirror of the compiled ``structmc._core`` extension; same signatures, same
semantics. ``idx`` arguments are int64 flat indices into the row-major matrix
buffer and are assumed unique (they index the missing entries of a mask).
"""

import numpy as np


def masked_gradient_update(X, G, s, obs, M_obs, out):
    """out = X - s*G on unobserved entries, = M_obs on observed ones."""
    np.multiply(G, -s, out=out)
    out += X
    np.copyto(out, M_obs, where=(obs != 0))
    return out


def sparsity_step_inplace(x_flat, idx, w, c):
    """x[idx] -= c * w * x[idx] (one reweighted gradient step on the missing entries)."""
    z = x_flat[idx]
    x_flat[idx] = z - c * (w * z)


def sparsity_weights_flat(x_flat, idx, eps, q, out):
    """out = (x[idx]^2 + eps)^(q/2 - 1)."""
    z = x_flat[idx]
    t = z * z + eps
    if q == 1.0:
        np.divide(1.0, np.sqrt(t), out=out)
    elif q == 0.0:
        np.divide(1.0, t, out=out)
    else:
        np.power(t, 0.5 * q - 1.0, out=out)
    return out


def abs_sum_flat(x_flat, idx):
    """l1 norm of the entries at idx."""
    return float(np.abs(x_flat[idx]).sum())
