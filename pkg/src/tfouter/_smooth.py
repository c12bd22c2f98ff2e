"""Smooth compactly supported cutoffs used by every generator construction."""

import numpy as np


def bump(u):
    """C^inf bump supported on (-1, 1) with peak value 1 at 0.

    bump(u) = exp(1 - 1/(1 - u^2)) for |u| < 1, else 0.
    """
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    m = np.abs(u) < 1.0
    v = u[m]
    out[m] = np.exp(1.0 - 1.0 / (1.0 - v * v))
    return out


def expstep(x):
    """C^inf monotone step: 0 for x <= 0, 1 for x >= 1, strictly rising between.

    Built from B(x) = exp(-1/x) as B(x) / (B(x) + B(1-x)).
    """
    x = np.asarray(x, dtype=float)
    lo = np.zeros_like(x)
    pos = x > 0
    lo[pos] = np.exp(-1.0 / x[pos])
    hi = np.zeros_like(x)
    neg = x < 1
    hi[neg] = np.exp(-1.0 / (1.0 - x[neg]))
    tot = lo + hi
    # tot > 0 everywhere: one term is positive unless x in {0,1} where the
    # other equals exp(-1); guard anyway for subnormal underflow.
    return np.where(tot > 0, lo / np.where(tot > 0, tot, 1.0), 0.0)
