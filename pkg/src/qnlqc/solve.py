"""Newton equilibrium solves and U^{1,2} stability constants.

The mean-zero constraint on strain perturbations (periodicity) is handled
with an explicit orthonormal basis of ``{g : sum g = 0}``.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg

from .calculus import BondFunctional, diff1, integrate_strain, load_to_bond_form
from .chain import (
    Deformation,
    StrainHessian,
    checked_strain,
    grad_atomistic,
    hessian_atomistic,
)
from .potentials import Potential
from .qc import RegionPartition, empty_partition, grad_qnl, hessian_qnl

__all__ = [
    "MODELS",
    "SolveError",
    "SolveOptions",
    "SolveResult",
    "StabilityResult",
    "gradient",
    "hessian",
    "residual",
    "newton_solve",
    "stability_constant",
    "rayleigh_quotient",
]

log = logging.getLogger(__name__)

MODELS = ("atomistic", "qnl", "cauchy-born")
RCOND_MIN = 1e-12


class SolveError(RuntimeError):
    """Newton failure; for singular Hessians ``smallest_eigenvalue`` is the one nearest zero."""

    def __init__(self, msg: str, smallest_eigenvalue: float | None = None):
        super().__init__(msg)
        self.smallest_eigenvalue = smallest_eigenvalue


@dataclass(frozen=True)
class SolveOptions:
    tol_residual: float = 1e-10
    max_iter: int = 100
    strain_floor: float | None = None  # default: 0.1 * min initial strain
    max_halvings: int = 40

    def __post_init__(self):
        if not self.tol_residual > 0:
            raise ValueError("tol_residual must be positive")
        if self.strain_floor is not None and not self.strain_floor > 0:
            raise ValueError("strain_floor must be positive")


@dataclass(frozen=True)
class SolveResult:
    y: Deformation
    iterations: int
    residual: float
    history: tuple = field(default=())


@dataclass(frozen=True)
class StabilityResult:
    constant: float
    eigenmode: np.ndarray  # mean-zero displacement with ||u'||_{l2_eps} = 1
    spectrum: np.ndarray | None = None


def _partition_for(model: str, N: int, part: RegionPartition | None) -> RegionPartition | None:
    if model == "atomistic":
        return None
    if model == "cauchy-born":
        return empty_partition(N)
    if model == "qnl":
        if part is None:
            raise ValueError("the qnl model needs a region partition")
        return part
    raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")


def gradient(model: str, y: Deformation, pot: Potential, part: RegionPartition | None = None) -> BondFunctional:
    p = _partition_for(model, y.N, part)
    return grad_atomistic(y, pot) if p is None else grad_qnl(y, pot, p)


def hessian(model: str, y: Deformation, pot: Potential, part: RegionPartition | None = None) -> StrainHessian:
    p = _partition_for(model, y.N, part)
    return hessian_atomistic(y, pot) if p is None else hessian_qnl(y, pot, p)


def residual(model: str, y: Deformation, pot: Potential, f=None, part=None) -> BondFunctional:
    """First variation of the total energy, ``DPhi(y) - <f, .>``."""
    g = gradient(model, y, pot, part)
    if f is None:
        return g
    return g - load_to_bond_form(f, y.eps)


@lru_cache(maxsize=32)
def _mean_zero_basis(N: int) -> np.ndarray:
    """Orthonormal ``N x (N-1)`` basis of the vectors with zero sum."""
    q, _ = np.linalg.qr(np.eye(N, N - 1) - 1.0 / N, mode="reduced")
    # columns of (I - 11^T/N) restricted to N-1 of them span 1^perp
    q.setflags(write=False)
    return q


def _solve_checked(K: np.ndarray, rhs: np.ndarray, eps: float) -> np.ndarray:
    """LU solve that refuses numerically singular reduced Hessians."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(K)
    anorm = float(np.abs(K).sum(axis=0).max())
    rcond, _ = scipy.linalg.lapack.dgecon(lu, anorm, norm="1")
    if not rcond > RCOND_MIN:
        # the Gram matrix on the orthonormal basis is eps * I
        w = np.linalg.eigvalsh(K) / eps
        lam = float(w[np.argmin(np.abs(w))])
        raise SolveError(f"Hessian singular on U (smallest |eigenvalue| {lam:.3e}, rcond {rcond:.1e})", lam)
    return scipy.linalg.lu_solve((lu, piv), rhs)


def newton_solve(
    model: str,
    y0: Deformation,
    pot: Potential,
    f: np.ndarray | None = None,
    part: RegionPartition | None = None,
    opts: SolveOptions | None = None,
) -> SolveResult:
    """Damped Newton iteration for ``DPhi^tot(y)[u] = 0`` on mean-zero u."""
    opts = opts or SolveOptions()
    floor = opts.strain_floor
    if floor is None:
        floor = 0.1 * float(checked_strain(y0).min())
    Q = _mean_zero_basis(y0.N)
    eps = y0.eps

    y = y0
    r = residual(model, y, pot, f, part)
    rn = r.norm(2)
    history = [rn]
    it = 0
    while rn > opts.tol_residual:
        if it >= opts.max_iter:
            raise SolveError(f"Newton did not converge in {opts.max_iter} iterations (residual {rn:.3e})")
        K = Q.T @ hessian(model, y, pot, part).dense() @ Q
        rhs = -eps * (Q.T @ r.coeffs)
        z = _solve_checked(K, rhs, eps)
        du = integrate_strain(Q @ z, eps)

        t = 1.0
        for _ in range(opts.max_halvings):
            trial = y.displaced(t * du)
            if trial.strain.min() >= floor:
                r_trial = residual(model, trial, pot, f, part)
                rn_trial = r_trial.norm(2)
                if rn_trial < rn:
                    break
            t *= 0.5
        else:
            raise SolveError(f"line search failed at iteration {it} (residual {rn:.3e}, strain floor {floor:.3g})")
        y, r, rn = trial, r_trial, rn_trial
        it += 1
        history.append(rn)
        log.debug("newton %s it=%d step=%g residual=%.3e", model, it, t, rn)
    return SolveResult(y=y, iterations=it, residual=rn, history=tuple(history))


def stability_constant(
    model: str,
    y: Deformation,
    pot: Potential,
    part: RegionPartition | None = None,
    full_spectrum: bool = False,
) -> StabilityResult:
    """Smallest eigenvalue of ``H u = lambda G u`` on U, ``G[u, v] = <u', v'>``."""
    H = hessian(model, y, pot, part)
    Q = _mean_zero_basis(y.N)
    Hr = Q.T @ H.dense() @ Q
    Gr = y.eps * (Q.T @ Q)
    if full_spectrum:
        w, v = scipy.linalg.eigh(Hr, Gr)
    else:
        w, v = scipy.linalg.eigh(Hr, Gr, subset_by_index=[0, 0])
    g = Q @ v[:, 0]
    g /= np.sqrt(y.eps * np.dot(g, g))
    mode = integrate_strain(g, y.eps)
    return StabilityResult(float(w[0]), mode, np.array(w) if full_spectrum else None)


def rayleigh_quotient(model: str, y: Deformation, pot: Potential, u: np.ndarray, part: RegionPartition | None = None) -> float:
    """``D^2 Phi(y)[u, u] / ||u'||^2_{l2_eps}`` for a nonzero mean-zero ``u``."""
    g = diff1(np.asarray(u, dtype=float), y.eps)
    denom = y.eps * float(np.dot(g, g))
    if denom == 0.0:
        raise ValueError("Rayleigh quotient of a zero displacement")
    return hessian(model, y, pot, part).form(g) / denom
