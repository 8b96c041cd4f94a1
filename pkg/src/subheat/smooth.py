"""Fixed smooth cutoffs built from the mollifier g(u) = exp(-1/u).

Every cutoff in the package is pinned to an explicit formula so results are
bit-reproducible. All functions are vectorized over numpy arrays.
"""

import numpy as np


def mollifier(u):
    """g(u) = exp(-1/u) for u > 0, else 0."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    pos = u > 0
    out[pos] = np.exp(-1.0 / u[pos])
    return out


def transition(x, a, b):
    """Smooth rise from 0 (x <= a) to 1 (x >= b): g(x-a) / (g(x-a) + g(b-x))."""
    x = np.asarray(x, dtype=float)
    up = mollifier(x - a)
    down = mollifier(b - x)
    return up / (up + down)


def split_step(x):
    """Step used by the Gaussian wave split: 0 for x <= -1, 1 for x >= -1/2."""
    return transition(x, -1.0, -0.5)


def dyadic_cutoff(x):
    """phi: equal to 1 on |x| <= 1 and 0 on |x| >= 2."""
    ax = np.abs(np.asarray(x, dtype=float))
    return 1.0 - transition(ax, 1.0, 2.0)


def dyadic_bump(x):
    """psi(x) = phi(x) - phi(2x); supported in 1/2 <= |x| <= 2."""
    x = np.asarray(x, dtype=float)
    return dyadic_cutoff(x) - dyadic_cutoff(2.0 * x)


def window(lam):
    """eta: 1 on [3/4, 3/2], supported in (1/2, 2)."""
    lam = np.asarray(lam, dtype=float)
    return transition(lam, 0.5, 0.75) * (1.0 - transition(lam, 1.5, 2.0))


def ball_bump(r, delta):
    """Mollified ball indicator: 1 for r <= delta/2, 0 for r >= delta."""
    r = np.asarray(r, dtype=float)
    return transition(1.0 - r / delta, 0.0, 0.5)
