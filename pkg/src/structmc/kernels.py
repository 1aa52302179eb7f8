"""Kernel dispatch: compiled Cython core when built, pure numpy otherwise.

The compiled extension is optional; set ``STRUCTMC_PURE=1`` in the environment
(before import) or call :func:`set_backend` to force the pure path, e.g. for
the compiled-vs-pure benchmark.
"""

import os

from . import _core_py

try:
    from . import _core
except ImportError:
    _core = None

HAVE_COMPILED = _core is not None

if HAVE_COMPILED and os.environ.get("STRUCTMC_PURE", "0") not in ("0", "", "false"):
    _impl = _core_py
else:
    _impl = _core if HAVE_COMPILED else _core_py


def set_backend(name):
    """Select 'compiled' or 'pure'. Raises if 'compiled' was not built."""
    global _impl
    if name == "pure":
        _impl = _core_py
    elif name == "compiled":
        if not HAVE_COMPILED:
            raise RuntimeError("compiled kernel core is not available")
        _impl = _core
    else:
        raise ValueError(f"unknown backend {name!r}")


def backend_name():
    return "compiled" if _impl is _core else "pure"


def masked_gradient_update(X, G, s, obs, M_obs, out):
    return _impl.masked_gradient_update(X, G, s, obs, M_obs, out)


def sparsity_step_inplace(x_flat, idx, w, c):
    return _impl.sparsity_step_inplace(x_flat, idx, w, c)


def sparsity_weights_flat(x_flat, idx, eps, q, out):
    return _impl.sparsity_weights_flat(x_flat, idx, eps, q, out)


def abs_sum_flat(x_flat, idx):
    return _impl.abs_sum_flat(x_flat, idx)
