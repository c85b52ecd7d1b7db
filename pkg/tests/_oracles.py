"""Independent reference computations used by the tests.

Nothing here calls into the vectorised package code paths: energies are
written as explicit loops over atom positions, dual norms are obtained
from the KKT system of the constrained maximisation, and derivatives from
central differences.
"""

from __future__ import annotations

import numpy as np


def positions(y):
    """Atom positions ``y_1..y_N`` and a closure extending them periodically."""
    pos = np.asarray(y.y, dtype=float)
    N, F = y.N, y.F

    def at(k: int) -> float:
        q, r = divmod(k - 1, N)
        return pos[r] + q * F  # y_{xi + N} = y_xi + F

    return at


def energy_loop(y, pot, atomistic=None):
    """Stored energy by a double loop over atoms.

    ``atomistic=None`` gives the fully atomistic energy; otherwise atoms
    outside the given set use the Cauchy-Born split.
    """
    at = positions(y)
    eps = y.eps
    total = 0.0
    for xi in range(1, y.N + 1):
        r_nn = (at(xi) - at(xi - 1)) / eps
        total += float(pot(r_nn))
        if atomistic is None or xi in atomistic:
            total += float(pot((at(xi + 1) - at(xi - 1)) / eps))
        else:
            left = (at(xi) - at(xi - 1)) / eps
            right = (at(xi + 1) - at(xi)) / eps
            total += 0.5 * (float(pot(2 * left)) + float(pot(2 * right)))
    return eps * total


def kkt_dual_norm(t, eps):
    """``sup { eps t.g : eps g.g = 1, sum g = 0 }`` via the KKT system.

    The maximiser is parallel to the solution of
    ``min 1/2 eps g.g - eps t.g  s.t.  1.g = 0``.
    """
    t = np.asarray(t, dtype=float)
    N = t.size
    K = np.zeros((N + 1, N + 1))
    K[:N, :N] = eps * np.eye(N)
    K[:N, N] = 1.0
    K[N, :N] = 1.0
    rhs = np.concatenate([eps * t, [0.0]])
    g = np.linalg.solve(K, rhs)[:N]
    nrm = np.sqrt(eps * g @ g)
    if nrm == 0.0:
        return 0.0
    return float(eps * t @ g / nrm)


def random_mean_zero(rng, N, scale=1.0):
    u = rng.standard_normal(N) * scale
    return u - u.mean()


def central_first(fun, u, v, h=1e-6):
    return (fun(u + h * v) - fun(u - h * v)) / (2 * h)
