"""Periodic next-nearest-neighbour chain: deformations and the atomistic model.

A deformation is ``y = F x + u`` with ``x_xi = eps * xi`` and ``u`` an
N-periodic displacement with zero sum.  The stored energy per period is

    Phi(y) = eps * sum_xi [ phi(y'_xi) + phi(y'_xi + y'_{xi+1}) ].

Second variations are returned as :class:`StrainHessian` objects acting on
bond differences ``g = u'``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .calculus import BondFunctional, diff1, forward_diff, integrate_strain
from .potentials import Potential

__all__ = [
    "AdmissibilityError",
    "ChainConfig",
    "Deformation",
    "AdmissibilityReport",
    "StrainHessian",
    "admissibility",
    "energy_atomistic",
    "grad_atomistic",
    "hessian_atomistic",
    "total_energy",
]

DENSE_LIMIT = 4096


class AdmissibilityError(ValueError):
    """Raised when some bond has a nonpositive strain."""

    def __init__(self, bond: int, strain: float):
        self.bond = bond
        self.strain = strain
        super().__init__(f"bond {bond} has nonpositive strain {strain:.6g}")


@dataclass(frozen=True)
class ChainConfig:
    N: int
    F: float

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 4:
            raise ValueError(f"N must be an integer >= 4, got {self.N}")
        if not self.F > 0:
            raise ValueError(f"F must be positive, got {self.F}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "F", float(self.F))

    @property
    def eps(self) -> float:
        return 1.0 / self.N

    @property
    def x(self) -> np.ndarray:
        return np.arange(1, self.N + 1) / self.N


@dataclass(frozen=True)
class Deformation:
    """``y = F x + u``; ``u`` is projected to zero mean on construction."""

    config: ChainConfig
    u: np.ndarray = field(repr=False)

    def __post_init__(self):
        u = np.array(self.u, dtype=float).reshape(-1)
        if u.size != self.config.N:
            raise ValueError(f"displacement has length {u.size}, expected {self.config.N}")
        mean = u.mean()
        # leave already-centred input untouched so CSV round trips are exact
        if abs(mean) > 1e-14 * max(1.0, float(np.abs(u).max(initial=0.0))):
            u = u - mean
        u.setflags(write=False)
        object.__setattr__(self, "u", u)

    @classmethod
    def uniform(cls, config: ChainConfig) -> "Deformation":
        return cls(config, np.zeros(config.N))

    @classmethod
    def from_strains(cls, strains: np.ndarray) -> "Deformation":
        """Build the deformation with the given bond strains; ``F`` is their mean."""
        s = np.asarray(strains, dtype=float)
        F = float(s.mean())
        cfg = ChainConfig(s.size, F)
        return cls(cfg, integrate_strain(s - F, cfg.eps))

    @property
    def N(self) -> int:
        return self.config.N

    @property
    def eps(self) -> float:
        return self.config.eps

    @property
    def F(self) -> float:
        return self.config.F

    @property
    def strain(self) -> np.ndarray:
        """Bond strains ``y'_xi = F + u'_xi``."""
        return self.config.F + diff1(self.u, self.config.eps)

    @property
    def y(self) -> np.ndarray:
        return self.config.F * self.config.x + self.u

    def y2(self) -> np.ndarray:
        """Atom-sited ``y''``."""
        return forward_diff(self.strain, self.eps)

    def y3(self) -> np.ndarray:
        """Bond-sited ``y'''``."""
        return diff1(self.y2(), self.eps)

    def displaced(self, w: np.ndarray) -> "Deformation":
        return Deformation(self.config, self.u + np.asarray(w, dtype=float))

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["xi", "u", "strain"])
        for i, (ui, si) in enumerate(zip(self.u, self.strain), start=1):
            w.writerow([i, repr(float(ui)), repr(float(si))])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, path: str | Path, F: float) -> "Deformation":
        return cls.from_csv_text(Path(path).read_text(), F)

    @classmethod
    def from_csv_text(cls, text: str, F: float) -> "Deformation":
        rows = list(csv.DictReader(io.StringIO(text)))
        rows.sort(key=lambda r: int(r["xi"]))
        u = np.array([float(r["u"]) for r in rows])
        return cls(ChainConfig(len(rows), F), u)


@dataclass(frozen=True)
class AdmissibilityReport:
    min_strain: float
    concave_ok: bool
    r_lb: float


def admissibility(y: Deformation, pot: Potential, continuum_bonds=None) -> AdmissibilityReport:
    """Strain diagnostics; ``continuum_bonds`` is the 1-based set C' (all bonds if None)."""
    s = y.strain
    if continuum_bonds is None:
        sel = s
    else:
        idx = np.array(sorted(continuum_bonds), dtype=int) - 1
        sel = s[idx]
    r_lb = 2.0 * float(sel.min()) if sel.size else float("inf")
    return AdmissibilityReport(float(s.min()), bool(s.min() >= pot.r_star / 2), r_lb)


def checked_strain(y: Deformation) -> np.ndarray:
    s = y.strain
    k = int(np.argmin(s))
    if not s[k] > 0:
        raise AdmissibilityError(k + 1, float(s[k]))
    return s


def pair_strain(s: np.ndarray) -> np.ndarray:
    """Atom-sited second-neighbour distances ``y'_xi + y'_{xi+1}``."""
    return s + np.roll(s, -1)


@dataclass(frozen=True)
class StrainHessian:
    """Symmetric form ``D^2[u, v] = g_u^T K g_v`` with ``g = u'``.

    ``K`` is periodic tridiagonal: ``diag[i]`` on the diagonal and ``off[i]``
    coupling bond ``i+1`` with bond ``i+2`` (1-based, cyclic).  Both already
    carry the ``eps`` weight.
    """

    diag: np.ndarray
    off: np.ndarray
    eps: float

    @property
    def N(self) -> int:
        return self.diag.size

    def matvec(self, g: np.ndarray) -> np.ndarray:
        return self.diag * g + self.off * np.roll(g, -1) + np.roll(self.off * g, 1)

    def form(self, g1: np.ndarray, g2: np.ndarray | None = None) -> float:
        """Bilinear form on strain vectors."""
        if g2 is None:
            g2 = g1
        return float(np.dot(g2, self.matvec(g1)))

    def form_u(self, u: np.ndarray, v: np.ndarray | None = None) -> float:
        """Bilinear form on displacements."""
        gu = diff1(u, self.eps)
        gv = gu if v is None else diff1(v, self.eps)
        return self.form(gu, gv)

    def apply(self, u: np.ndarray) -> BondFunctional:
        """``v -> D^2[u, v]`` as a bond functional."""
        return BondFunctional(self.matvec(diff1(u, self.eps)) / self.eps, self.eps)

    def dense(self) -> np.ndarray:
        n = self.N
        if n > DENSE_LIMIT:
            raise ValueError(f"dense assembly limited to N <= {DENSE_LIMIT}")
        K = np.diag(self.diag.astype(float))
        i = np.arange(n)
        j = (i + 1) % n
        np.add.at(K, (i, j), self.off)
        np.add.at(K, (j, i), self.off)
        return K


def energy_atomistic(y: Deformation, pot: Potential) -> float:
    s = checked_strain(y)
    return float(y.eps * np.sum(pot(s) + pot(pair_strain(s))))


def grad_atomistic(y: Deformation, pot: Potential) -> BondFunctional:
    """``DPhi(y)`` with bond coefficients ``phi'(y'_xi) + phi'(p_{xi-1}) + phi'(p_xi)``."""
    s = checked_strain(y)
    dp = pot.d1(pair_strain(s))
    return BondFunctional(pot.d1(s) + dp + np.roll(dp, 1), y.eps)


def hessian_atomistic(y: Deformation, pot: Potential) -> StrainHessian:
    s = checked_strain(y)
    w = pot.d2(pair_strain(s))
    diag = pot.d2(s) + w + np.roll(w, 1)
    return StrainHessian(y.eps * diag, y.eps * w, y.eps)


def total_energy(energy: float, y: Deformation, f: np.ndarray | None) -> float:
    """``Phi(y) - <f, y>``; the ``F x`` part contributes a constant for mean-zero f."""
    if f is None:
        return energy
    return energy - float(y.eps * np.dot(np.asarray(f, dtype=float), y.y))
