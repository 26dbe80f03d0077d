"""Independent reference solutions shared by several test modules."""
import math

import numpy as np
from scipy.optimize import brentq


def symmetric_roots(n_core, n_clad, d, lam, pol="TE"):
    """Independent oracle: even and odd branches of the textbook symmetric-slab equations."""
    k0 = 2 * math.pi / lam
    r = (n_core / n_clad) ** 2 if pol == "TM" else 1.0
    eps = 1e-13

    def kappa(n):
        return k0 * math.sqrt(n_core**2 - n**2)

    def gamma(n):
        return k0 * math.sqrt(n**2 - n_clad**2)

    def even(n):
        return kappa(n) * math.sin(kappa(n) * d / 2) - r * gamma(n) * math.cos(kappa(n) * d / 2)

    def odd(n):
        return kappa(n) * math.cos(kappa(n) * d / 2) + r * gamma(n) * math.sin(kappa(n) * d / 2)

    grid = np.linspace(n_clad + eps, n_core - eps, 20001)
    roots = []
    for f in (even, odd):
        v = np.array([f(x) for x in grid])
        for i in np.nonzero(np.sign(v[:-1]) * np.sign(v[1:]) < 0)[0]:
            roots.append(brentq(f, grid[i], grid[i + 1], xtol=1e-15, rtol=1e-15))
    return sorted(roots, reverse=True)
