"""Compiled inner loops.

The grid Hölder seminorm is an exact maximum over all O(N^2) node pairs,
which is too slow in pure numpy for thousands of paths at N = 4096.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _seminorm_sq(vals, inv_pow_sq):
    n = vals.shape[0]
    d = vals.shape[1]
    best = 0.0
    for i in range(n - 1):
        for j in range(i + 1, n):
            s = 0.0
            for c in range(d):
                diff = vals[j, c] - vals[i, c]
                s += diff * diff
            q = s * inv_pow_sq[j - i]
            if q > best:
                best = q
    return best


@njit(cache=True)
def _seminorm_batch(vals, inv_pow_sq, out):
    for p in range(vals.shape[0]):
        out[p] = np.sqrt(_seminorm_sq(vals[p], inv_pow_sq))


def holder_seminorm_array(values, dt, gamma):
    """Grid γ-Hölder seminorm of one or many paths.

    Args:
        values: array of shape (n+1, d) or (P, n+1, d).
        dt: grid step.
        gamma: Hölder exponent.

    Returns:
        float for a single path, array of shape (P,) for a batch.
    """
    values = np.asarray(values, dtype=np.float64)
    single = values.ndim == 2
    if single:
        values = values[None]
    if values.ndim != 3:
        raise ValueError("values must have shape (n+1, d) or (P, n+1, d)")
    n1 = values.shape[1]
    lags = np.arange(n1, dtype=np.float64)
    inv = np.zeros(n1)
    inv[1:] = (lags[1:] * dt) ** (-2.0 * gamma)
    out = np.empty(values.shape[0])
    _seminorm_batch(np.ascontiguousarray(values), inv, out)
    return float(out[0]) if single else out
