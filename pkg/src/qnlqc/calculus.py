"""Periodic finite differences, weighted norms and negative-norm duals.

Fields over one period are plain 1-D numpy arrays of length N.  Position
``i`` of an array holds the value at index ``xi = i + 1``.  Atom-sited
fields (displacements, second differences) live on atoms, bond-sited
fields (first and third differences, stresses) live on the bond
``(xi - 1, xi)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

__all__ = [
    "diff1",
    "diff2",
    "diff3",
    "forward_diff",
    "lp_norm",
    "dual_norm",
    "BondFunctional",
    "load_to_bond_form",
    "bond_form_to_load",
    "integrate_strain",
]

_SHIFT_TOL = 1e-12


def diff1(v: np.ndarray, eps: float) -> np.ndarray:
    """Backward difference ``v'_xi = (v_xi - v_{xi-1}) / eps`` (atom -> bond)."""
    v = np.asarray(v, dtype=float)
    return (v - np.roll(v, 1)) / eps


def forward_diff(v: np.ndarray, eps: float) -> np.ndarray:
    """Forward difference ``(v_{xi+1} - v_xi) / eps`` (bond -> atom).

    Applied to a strain field this gives ``y''``.
    """
    v = np.asarray(v, dtype=float)
    return (np.roll(v, -1) - v) / eps


def diff2(v: np.ndarray, eps: float) -> np.ndarray:
    """Centred second difference of an atom-sited field."""
    v = np.asarray(v, dtype=float)
    return (np.roll(v, -1) - 2.0 * v + np.roll(v, 1)) / eps**2


def diff3(v: np.ndarray, eps: float) -> np.ndarray:
    """Third difference ``(v_{xi+1} - 3v_xi + 3v_{xi-1} - v_{xi-2}) / eps^3``."""
    v = np.asarray(v, dtype=float)
    return (np.roll(v, -1) - 3.0 * v + 3.0 * np.roll(v, 1) - np.roll(v, 2)) / eps**3


def _select(v: np.ndarray, subset: Iterable[int] | None) -> np.ndarray:
    if subset is None:
        return v
    idx = np.fromiter((int(s) - 1 for s in subset), dtype=int)
    return v[idx]


def lp_norm(v: np.ndarray, p: float, eps: float, subset: Iterable[int] | None = None) -> float:
    """Weighted norm ``(eps * sum_{xi in S} |v_xi|^p)^(1/p)``, or the max for p = inf.

    ``subset`` holds 1-based indices; ``None`` means the whole period and an
    empty subset gives 0.
    """
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    w = np.abs(_select(np.asarray(v, dtype=float), subset))
    if w.size == 0:
        return 0.0
    if np.isinf(p):
        return float(w.max())
    return float((eps * np.sum(w**p)) ** (1.0 / p))


def _best_shift(t: np.ndarray, p: float) -> float:
    """Constant c minimising ``sum |t - c|^p``."""
    if p == 2:
        return float(t.mean())
    if np.isinf(p):
        return 0.5 * (float(t.min()) + float(t.max()))
    if p == 1:
        return float(np.median(t))
    # derivative of sum |t-c|^p is strictly decreasing in c for p > 1
    lo, hi = float(t.min()), float(t.max())
    scale = max(abs(lo), abs(hi), 1.0)
    while hi - lo > _SHIFT_TOL * scale:
        mid = 0.5 * (lo + hi)
        d = t - mid
        g = np.sum(np.sign(d) * np.abs(d) ** (p - 1.0))
        if g > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def dual_norm(coeffs: np.ndarray, p: float, eps: float) -> float:
    """Norm in U^{-1,p} of the functional ``u -> eps * sum t_xi u'_xi``.

    The supremum over mean-zero periodic ``u`` with unit ``||u'||_{p'}``
    equals the ``l^p_eps`` distance from ``t`` to the constants.
    """
    t = np.asarray(coeffs, dtype=float)
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    c = _best_shift(t, p)
    return lp_norm(t - c, p, eps)


@dataclass(frozen=True)
class BondFunctional:
    """Linear functional on mean-zero periodic displacements.

    Represented by per-bond coefficients ``t`` through
    ``T[u] = eps * sum_xi t_xi u'_xi``; adding a constant to ``t`` does not
    change ``T``.
    """

    coeffs: np.ndarray
    eps: float

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def N(self) -> int:
        return self.coeffs.size

    def __call__(self, u: np.ndarray) -> float:
        return float(self.eps * np.dot(self.coeffs, diff1(u, self.eps)))

    def on_strain(self, g: np.ndarray) -> float:
        """Evaluate on a displacement given by its bond differences ``g = u'``."""
        return float(self.eps * np.dot(self.coeffs, g))

    def norm(self, p: float = 2) -> float:
        return dual_norm(self.coeffs, p, self.eps)

    def __sub__(self, other: "BondFunctional") -> "BondFunctional":
        return BondFunctional(self.coeffs - other.coeffs, self.eps)

    def __add__(self, other: "BondFunctional") -> "BondFunctional":
        return BondFunctional(self.coeffs + other.coeffs, self.eps)


def load_to_bond_form(f: np.ndarray, eps: float, atol: float = 1e-10) -> BondFunctional:
    """Rewrite ``u -> eps * sum f_xi u_xi`` as a bond functional.

    Uses summation by parts, ``F_xi = -eps * sum_{eta < xi} f_eta``.
    """
    f = np.asarray(f, dtype=float)
    total = float(np.sum(f))
    if abs(total) > atol * max(1.0, float(np.abs(f).sum())):
        raise ValueError(f"load must have zero sum over the period, got {total:.3e}")
    partial = np.concatenate(([0.0], np.cumsum(f)[:-1]))
    return BondFunctional(-eps * partial, eps)


def bond_form_to_load(T: BondFunctional) -> np.ndarray:
    """Inverse of :func:`load_to_bond_form`: the mean-zero atom-sited load."""
    t = T.coeffs
    return (t - np.roll(t, -1)) / T.eps


def integrate_strain(g: np.ndarray, eps: float) -> np.ndarray:
    """Mean-zero periodic displacement whose backward difference is ``g``.

    ``g`` must sum to zero (periodicity).
    """
    g = np.asarray(g, dtype=float)
    u = eps * np.cumsum(g)
    return u - u.mean()
