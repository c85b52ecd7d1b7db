"""Pair potentials with analytic derivatives up to third order.

Every potential is convex on ``(0, r_star)`` and concave on
``(r_star, inf)``.  ``sup_abs(j, s)`` returns ``sup_{r >= s} |phi^(j)(r)|``,
evaluated exactly from the finitely many critical points of each
derivative rather than by sampling.
"""

from __future__ import annotations

import math
from math import factorial

import numpy as np

__all__ = [
    "Potential",
    "LennardJones",
    "Morse",
    "CutoffPotential",
    "lennard_jones",
    "morse",
    "lennard_jones_cutoff",
    "potential_from_spec",
]


class Potential:
    """Base class; subclasses implement ``derivative`` and ``critical_points``."""

    r_star: float
    r_cut: float | None = None
    name: str = "potential"

    def derivative(self, r, order: int):
        raise NotImplementedError

    def critical_points(self, order: int) -> list[float]:
        """Points where ``|phi^(order)|`` may attain a local max (excluding r -> inf)."""
        raise NotImplementedError

    def __call__(self, r):
        return self.derivative(r, 0)

    def d1(self, r):
        return self.derivative(r, 1)

    def d2(self, r):
        return self.derivative(r, 2)

    def d3(self, r):
        return self.derivative(r, 3)

    def sup_abs(self, order: int, s: float) -> float:
        """``C_j(s) = sup_{r >= s} |phi^(j)(r)|``; ``s = inf`` gives 0."""
        if math.isinf(s):
            return 0.0
        if s <= 0:
            raise ValueError("sup_abs needs s > 0")
        pts = [s] + [c for c in self.critical_points(order) if c > s]
        return float(max(abs(float(self.derivative(c, order))) for c in pts))

    def describe(self) -> dict:
        return {"name": self.name}


class LennardJones(Potential):
    """``phi(r) = r^-12 - 2 r^-6``, minimum -1 at r = 1."""

    name = "lj"

    def __init__(self):
        self.r_star = (13.0 / 7.0) ** (1.0 / 6.0)

    @staticmethod
    def _coeffs(order: int) -> tuple[float, float]:
        a, b = 1.0, -2.0
        for k in range(order):
            a *= -(12 + k)
            b *= -(6 + k)
        return a, b

    def derivative(self, r, order: int):
        a, b = self._coeffs(order)
        r = np.asarray(r, dtype=float)
        return a * r ** -(12 + order) + b * r ** -(6 + order)

    def critical_points(self, order: int) -> list[float]:
        a, b = self._coeffs(order + 1)
        # a r^-(13+j) + b r^-(7+j) = 0  <=>  r^6 = -a/b
        return [(-a / b) ** (1.0 / 6.0)]


class Morse(Potential):
    """``phi(r) = exp(-2 alpha (r-1)) - 2 exp(-alpha (r-1))``."""

    name = "morse"

    def __init__(self, alpha: float):
        if alpha <= 0:
            raise ValueError("Morse alpha must be positive")
        self.alpha = float(alpha)
        self.r_star = 1.0 + math.log(2.0) / self.alpha

    def _coeffs(self, order: int) -> tuple[float, float]:
        al = self.alpha
        return (-2.0 * al) ** order, -2.0 * (-al) ** order

    def derivative(self, r, order: int):
        c, d = self._coeffs(order)
        e = np.exp(-self.alpha * (np.asarray(r, dtype=float) - 1.0))
        return c * e * e + d * e

    def critical_points(self, order: int) -> list[float]:
        c, d = self._coeffs(order + 1)
        # c e^2 + d e = 0 with e = exp(-alpha (r-1)) > 0
        ratio = -d / c
        if ratio <= 0:
            return []
        return [1.0 - math.log(ratio) / self.alpha]

    def describe(self) -> dict:
        return {"name": self.name, "alpha": self.alpha}


class CutoffPotential(Potential):
    """A base potential blended to exactly zero on ``[r_cut, inf)``.

    On ``[r_cut - width, r_cut]`` the potential is the degree-7 Hermite
    polynomial matching ``phi, ..., phi'''`` of the base at the left end and
    zero at ``r_cut``, so the result is C^3.  Concavity of the blend is
    checked on construction.
    """

    def __init__(self, base: Potential, r_cut: float, width: float = 1.0, check: bool = True):
        self.base = base
        self.r_cut = float(r_cut)
        self.width = float(width)
        self.r_blend = self.r_cut - self.width
        if self.r_blend <= base.r_star:
            raise ValueError(
                f"blend start {self.r_blend} must exceed r_star = {base.r_star:.6f}"
            )
        self.r_star = base.r_star
        self.name = f"{base.name}-cutoff"
        self._poly = self._hermite()
        self._dpoly = [self._poly.deriv(k) for k in range(5)]
        if check:
            self._check_concave()

    def _hermite(self) -> np.polynomial.Polynomial:
        h = self.width
        rows, rhs = [], []
        for k in range(4):
            rows.append([factorial(k) if i == k else 0.0 for i in range(8)])
            rhs.append(float(self.base.derivative(self.r_blend, k)))
        for k in range(4):
            rows.append([factorial(i) / factorial(i - k) * h ** (i - k) if i >= k else 0.0 for i in range(8)])
            rhs.append(0.0)
        coef = np.linalg.solve(np.array(rows), np.array(rhs))
        return np.polynomial.Polynomial(coef)

    def _check_concave(self, samples: int = 4001):
        t = np.linspace(0.0, self.width, samples)
        worst = float(self._dpoly[2](t).max())
        scale = abs(float(self.base.derivative(self.r_blend, 2)))
        if worst > 1e-10 * max(scale, 1.0):
            raise ValueError(
                f"cutoff blend on [{self.r_blend}, {self.r_cut}] is not concave "
                f"(max phi'' = {worst:.3e}); use a wider blend"
            )

    def derivative(self, r, order: int):
        r_arr = np.asarray(r, dtype=float)
        out = np.zeros_like(r_arr)
        inner = r_arr < self.r_blend
        blend = (~inner) & (r_arr < self.r_cut)
        if np.any(inner):
            out[inner] = self.base.derivative(r_arr[inner], order)
        if np.any(blend):
            out[blend] = self._poly.deriv(order)(r_arr[blend] - self.r_blend)
        if out.ndim == 0:
            return float(out)
        return out

    def critical_points(self, order: int) -> list[float]:
        pts = [c for c in self.base.critical_points(order) if c < self.r_blend]
        pts.append(self.r_blend)
        for root in self._poly.deriv(order + 1).roots():
            if abs(root.imag) < 1e-12 and 0.0 <= root.real <= self.width:
                pts.append(self.r_blend + float(root.real))
        return pts

    def describe(self) -> dict:
        return {"name": self.name, "base": self.base.describe(), "r_cut": self.r_cut, "width": self.width}


def lennard_jones() -> LennardJones:
    return LennardJones()


def morse(alpha: float) -> Morse:
    return Morse(alpha)


def lennard_jones_cutoff(r_cut: float = 3.2, width: float = 1.0) -> CutoffPotential:
    return CutoffPotential(LennardJones(), r_cut, width)


def potential_from_spec(spec: str) -> Potential:
    """Parse ``lj``, ``lj-cutoff(3.2)`` or ``morse(4.0)``."""
    s = spec.strip().lower().replace(" ", "")
    if s == "lj":
        return lennard_jones()
    if s.startswith("lj-cutoff"):
        args = s[len("lj-cutoff"):].strip("()")
        vals = [float(a) for a in args.split(",") if a]
        return lennard_jones_cutoff(*vals)
    if s.startswith("morse(") and s.endswith(")"):
        return morse(float(s[6:-1]))
    raise ValueError(f"unknown potential spec {spec!r}")
