"""Quasi-nonlocal QC coupling.

Atoms in the atomistic set keep their second-neighbour term
``phi(y'_xi + y'_{xi+1})``; atoms in the continuum set replace it by the
Cauchy-Born split ``(phi(2 y'_xi) + phi(2 y'_{xi+1})) / 2``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .calculus import BondFunctional
from .chain import Deformation, StrainHessian, checked_strain, pair_strain
from .potentials import Potential

__all__ = [
    "PartitionError",
    "RegionPartition",
    "HessianCoeffs",
    "make_partition",
    "energy_qnl",
    "grad_qnl",
    "hessian_qnl",
    "hessian_coeffs",
    "atomistic_coefficient_form",
    "qnl_coefficient_form",
    "interval_partition",
    "full_partition",
    "empty_partition",
]


class PartitionError(ValueError):
    pass


def _wrap(i: int, N: int) -> int:
    return (i - 1) % N + 1


@dataclass(frozen=True)
class RegionPartition:
    """Atomistic/continuum split of ``{1..N}`` and its interface sets.

    All sets hold 1-based indices.  Unprimed interface sets are atoms in C
    adjacent to the periodically extended atomistic region; primed sets
    re-index them as bonds.
    """

    N: int
    atomistic: frozenset
    continuum: frozenset
    I_left: frozenset
    I_right: frozenset
    I_left_p: frozenset
    I_right_p: frozenset
    A_p: frozenset
    C_p: frozenset

    @property
    def interface(self) -> frozenset:
        return self.I_left | self.I_right

    @property
    def interface_p(self) -> frozenset:
        return self.I_right_p | self.I_left_p

    @property
    def interior_bonds(self) -> frozenset:
        """``C' minus I'``: bonds with both end atoms in the continuum."""
        return self.C_p - self.interface_p

    def mask(self, which: Iterable[int]) -> np.ndarray:
        m = np.zeros(self.N, dtype=bool)
        idx = [i - 1 for i in which]
        m[idx] = True
        return m

    @property
    def atomistic_mask(self) -> np.ndarray:
        return self.mask(self.atomistic)

    def to_json(self) -> str:
        return json.dumps({"N": self.N, "atomistic": sorted(self.atomistic)})

    @classmethod
    def from_json(cls, text: str) -> "RegionPartition":
        d = json.loads(text)
        return make_partition(int(d["N"]), d["atomistic"])

    def describe(self) -> dict:
        return {"N": self.N, "atomistic": sorted(self.atomistic)}


def make_partition(N: int, atomistic: Iterable[int]) -> RegionPartition:
    A = frozenset(int(a) for a in atomistic)
    bad = [a for a in A if not 1 <= a <= N]
    if bad:
        raise PartitionError(f"atomistic indices out of range 1..{N}: {sorted(bad)}")
    C = frozenset(range(1, N + 1)) - A
    I_l = frozenset(x for x in C if _wrap(x + 1, N) in A)
    I_r = frozenset(x for x in C if _wrap(x - 1, N) in A)
    both = I_l & I_r
    if both:
        raise PartitionError(
            "continuum components must contain at least two atoms; "
            f"single-atom components at {sorted(both)}"
        )
    I_l_p = frozenset(_wrap(x + 1, N) for x in I_l)
    return RegionPartition(
        N=N,
        atomistic=A,
        continuum=C,
        I_left=I_l,
        I_right=I_r,
        I_left_p=I_l_p,
        I_right_p=I_r,
        A_p=A - I_l_p,
        C_p=C | I_l_p,
    )


def interval_partition(N: int, start: int, end: int) -> RegionPartition:
    """Atomistic region ``{start, ..., end}`` (inclusive, wrapping past N)."""
    length = (end - start) % N + 1
    return make_partition(N, [_wrap(start + k, N) for k in range(length)])


def full_partition(N: int) -> RegionPartition:
    return make_partition(N, range(1, N + 1))


def empty_partition(N: int) -> RegionPartition:
    return make_partition(N, ())


def _check(y: Deformation, part: RegionPartition):
    if part.N != y.N:
        raise PartitionError(f"partition is for N={part.N}, deformation has N={y.N}")


def energy_qnl(y: Deformation, pot: Potential, part: RegionPartition) -> float:
    _check(y, part)
    s = checked_strain(y)
    a = part.atomistic_mask
    cb = 0.5 * (pot(2 * s) + pot(2 * np.roll(s, -1)))
    nnn = np.where(a, pot(pair_strain(s)), cb)
    return float(y.eps * np.sum(pot(s) + nnn))


def grad_qnl(y: Deformation, pot: Potential, part: RegionPartition) -> BondFunctional:
    _check(y, part)
    s = checked_strain(y)
    a = part.atomistic_mask
    c = ~a
    dp = np.where(a, pot.d1(pair_strain(s)), 0.0)
    # atom xi in C contributes phi'(2 y'_xi) to bond xi and phi'(2 y'_{xi+1}) to bond xi+1
    ncb = c.astype(float) + np.roll(c, 1)
    coeffs = pot.d1(s) + dp + np.roll(dp, 1) + ncb * pot.d1(2 * s)
    return BondFunctional(coeffs, y.eps)


def hessian_qnl(y: Deformation, pot: Potential, part: RegionPartition) -> StrainHessian:
    _check(y, part)
    s = checked_strain(y)
    a = part.atomistic_mask
    c = ~a
    w = np.where(a, pot.d2(pair_strain(s)), 0.0)
    ncb = c.astype(float) + np.roll(c, 1)
    diag = pot.d2(s) + w + np.roll(w, 1) + 2.0 * ncb * pot.d2(2 * s)
    return StrainHessian(y.eps * diag, y.eps * w, y.eps)


@dataclass(frozen=True)
class HessianCoeffs:
    """Coefficients of the strain-gradient form of both Hessians.

    ``A`` and ``A_tilde`` are bond-sited, ``B`` is atom-sited.
    """

    A: np.ndarray
    A_tilde: np.ndarray
    B: np.ndarray


def hessian_coeffs(y: Deformation, pot: Potential, part: RegionPartition) -> HessianCoeffs:
    _check(y, part)
    s = checked_strain(y)
    N = y.N
    p2 = pot.d2(pair_strain(s))           # phi''(y'_xi + y'_{xi+1}) at atom xi
    p2_prev = np.roll(p2, 1)              # phi''(y'_{xi-1} + y'_xi) at bond xi
    s2 = pot.d2(s)
    cb2 = pot.d2(2 * s)
    A = s2 + 2 * p2_prev + 2 * p2
    At = np.empty(N)
    for xi in range(1, N + 1):
        i = xi - 1
        if xi in part.A_p:
            At[i] = s2[i] + 2 * p2_prev[i] + 2 * p2[i]
        elif xi in part.I_right_p:
            At[i] = s2[i] + 2 * p2_prev[i] + 2 * cb2[i]
        elif xi in part.I_left_p:
            At[i] = s2[i] + 2 * p2[i] + 2 * cb2[i]
        else:
            At[i] = s2[i] + 4 * cb2[i]
    return HessianCoeffs(A=A, A_tilde=At, B=-p2)


def atomistic_coefficient_form(coeffs: HessianCoeffs, eps: float) -> StrainHessian:
    """``eps sum A_xi |u'_xi|^2 + eps sum eps^2 B_xi |u''_xi|^2`` as a strain Hessian."""
    return _gradient_form(coeffs.A, coeffs.B, np.ones(coeffs.B.size, dtype=bool), eps)


def qnl_coefficient_form(coeffs: HessianCoeffs, part: RegionPartition, eps: float) -> StrainHessian:
    """``eps sum A~_xi |u'_xi|^2 + eps sum_{xi in A} eps^2 B_xi |u''_xi|^2``."""
    return _gradient_form(coeffs.A_tilde, coeffs.B, part.atomistic_mask, eps)


def _gradient_form(Acoef, B, mask, eps) -> StrainHessian:
    b = np.where(mask, B, 0.0)
    # (g_{i+1} - g_i)^2 adds b_i to both diagonals and -b_i to the coupling
    diag = Acoef + b + np.roll(b, 1)
    return StrainHessian(eps * diag, -eps * b, eps)
