"""Seeding helpers: counter-based generators and a stable seed-derivation hash.

All randomness in the package flows through explicit ``numpy.random.Generator``
objects backed by Philox (counter-based, 64-bit seedable); there is no global
RNG. Gaussian variates therefore come from numpy's Ziggurat sampler.

``derive_seed`` is the documented stable hash used by the experiment harness to
give every (cell, trial, purpose) its own independent 64-bit seed. It chains
the splitmix64 finalizer over the parts, so it is order-sensitive, stable
across runs/platforms/package versions, and independent of how many trials or
cells a grid has (trial t of cell (i, j) always hashes the same).
"""

import numpy as np

_MASK64 = (1 << 64) - 1


def _splitmix64(x):
    # splitmix64 finalizer (Steele et al.), the usual 64-bit mixing function.
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def derive_seed(*parts):
    """Hash integer parts into one 64-bit seed, order-sensitively.

    ``derive_seed(base, i, j, t, tag)`` is the harness convention: `base` the
    user seed, (i, j) the cell indices, t the trial index and `tag` the purpose
    (0 matrix, 1 mask, 2 noise, 3.. solvers).
    """
    state = 0
    for p in parts:
        state = _splitmix64(state ^ (int(p) & _MASK64))
    return state


def make_rng(seed):
    """Return a Philox-backed Generator for an integer seed (or pass one through)."""
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        raise ValueError("seed must be an integer or a numpy Generator")
    return np.random.Generator(np.random.Philox(int(seed) & _MASK64))
