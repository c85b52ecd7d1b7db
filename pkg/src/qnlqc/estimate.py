"""Consistency and stability estimators for the QNL-QC coupling.

Covers the negative-norm consistency bound, the coefficient gap between the
two Hessians, the a posteriori stability bound, the uniform-state
spectrum and the single-crack test function.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .calculus import BondFunctional, diff1, integrate_strain, lp_norm
from .chain import Deformation, checked_strain, pair_strain
from .potentials import Potential
from .qc import RegionPartition, empty_partition, hessian_coeffs, make_partition
from .solve import rayleigh_quotient, stability_constant

__all__ = [
    "ConsistencyReport",
    "StabilityGapReport",
    "CrackDemo",
    "continuum_constants",
    "truncation_functional",
    "truncation_grouped",
    "consistency_report",
    "coefficient_gap_bound",
    "apost_stability_report",
    "uniform_constants",
    "uniform_spectrum",
    "crack_state",
    "crack_test_function",
    "crack_demo",
    "random_admissible_state",
    "random_partition",
]


def continuum_constants(y: Deformation, pot: Potential, part: RegionPartition) -> tuple[float, float, float]:
    """``(r, C2(r), C3(r))`` with ``r = 2 min_{xi in C'} y'_xi`` (``inf`` if C' is empty)."""
    s = y.strain
    if part.C_p:
        r = 2.0 * float(min(s[i - 1] for i in part.C_p))
    else:
        r = math.inf
    return r, pot.sup_abs(2, r), pot.sup_abs(3, r)


def truncation_functional(y: Deformation, pot: Potential, part: RegionPartition, check: bool = True) -> BondFunctional:
    """``T = DPhi(y) - DPhi_qc(y)`` assembled atom by atom over the continuum set.

    With ``check`` the regrouped interface/interior assembly is computed too
    and both are required to agree bondwise.
    """
    s = checked_strain(y)
    N = y.N
    p1 = pot.d1(pair_strain(s))
    cb = pot.d1(2 * s)
    t = np.zeros(N)
    for xi in part.continuum:
        i = xi - 1
        j = xi % N  # bond xi + 1
        t[i] += p1[i] - cb[i]
        t[j] += p1[i] - cb[j]
    T = BondFunctional(t, y.eps)
    if check:
        G = truncation_grouped(y, pot, part)
        scale = max(1.0, float(np.abs(p1).max()), float(np.abs(cb).max()))
        gap = float(np.abs(G.coeffs - t).max())
        if gap > 1e-13 * scale:
            raise RuntimeError(f"truncation assemblies disagree by {gap:.3e}")
    return T


def truncation_grouped(y: Deformation, pot: Potential, part: RegionPartition) -> BondFunctional:
    """``T`` collected by bond: first-order interface terms plus interior terms."""
    s = checked_strain(y)
    N = y.N
    p1 = pot.d1(pair_strain(s))
    cb = pot.d1(2 * s)
    t = np.zeros(N)
    for xi in part.I_left:
        j = xi % N
        t[j] += p1[xi - 1] - cb[j]
    for xi in part.I_right:
        i = xi - 1
        t[i] += p1[i] - cb[i]
    for xi in part.interior_bonds:
        i = xi - 1
        t[i] += p1[i - 1] + p1[i] - 2 * cb[i]
    return BondFunctional(t, y.eps)


@dataclass(frozen=True)
class ConsistencyReport:
    measured: float
    bound: float
    p: float
    interface: float
    third_diff: float
    quadratic: float
    coarse_interface: float
    C2: float
    C3: float
    r_arg: float

    @property
    def holds(self) -> bool:
        return self.measured <= self.bound * (1 + 1e-12) + 1e-15

    def to_dict(self) -> dict:
        d = asdict(self)
        d["holds"] = self.holds
        return d


def consistency_report(y: Deformation, pot: Potential, part: RegionPartition, p: float = 2) -> ConsistencyReport:
    """Exact ``||DPhi(y) - DPhi_qc(y)||_{U^{-1,p}}`` next to its a priori bound.

    The third-difference term is weighted by ``max(C2, C3)``: its Taylor
    coefficient is ``phi''(2 y'_xi)``, which C3 alone does not control.
    """
    eps = y.eps
    T = truncation_functional(y, pot, part)
    measured = T.norm(p)
    r, C2, C3 = continuum_constants(y, pot, part)
    y2 = y.y2()
    y3 = y.y3()
    interface = eps * C2 * lp_norm(y2, p, eps, part.interface)
    third = eps**2 * max(C2, C3) * lp_norm(y3, p, eps, part.interior_bonds)
    quad = eps**2 * C3 * lp_norm(y2, 2 * p, eps, part.continuum) ** 2
    n_if = len(part.interface)
    sup_if = lp_norm(y2, math.inf, eps, part.interface)
    if math.isinf(p):
        coarse = eps * C2 * sup_if
    else:
        coarse = eps ** (1 + 1 / p) * C2 * n_if ** (1 / p) * sup_if
    return ConsistencyReport(
        measured=measured,
        bound=interface + third + quad,
        p=p,
        interface=interface,
        third_diff=third,
        quadratic=quad,
        coarse_interface=coarse,
        C2=C2,
        C3=C3,
        r_arg=r,
    )


def coefficient_gap_bound(y: Deformation, pot: Potential, part: RegionPartition) -> float:
    """``4 eps C3 ||y''||_{l^inf(C)}``, a bound on ``max |A - A_tilde|``."""
    _, _, C3 = continuum_constants(y, pot, part)
    return 4.0 * y.eps * C3 * lp_norm(y.y2(), math.inf, y.eps, part.continuum)


@dataclass(frozen=True)
class StabilityGapReport:
    c_atomistic: float
    c_qc: float
    gap: float
    apost_bound: float
    concavity_ok: bool
    min_A: float
    min_A_tilde: float
    max_coeff_gap: float

    @property
    def holds(self) -> bool:
        """The a posteriori inequality (vacuous when concavity fails)."""
        return (not self.concavity_ok) or self.c_atomistic >= self.apost_bound - 1e-10 * max(1.0, abs(self.c_qc))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["holds"] = self.holds
        return d


def apost_stability_report(y: Deformation, pot: Potential, part: RegionPartition) -> StabilityGapReport:
    s = checked_strain(y)
    gap = coefficient_gap_bound(y, pot, part)
    c_atom = stability_constant("atomistic", y, pot).constant
    c_qc = stability_constant("qnl", y, pot, part).constant
    cmask = ~part.atomistic_mask
    concave = bool(np.all(pot.d2(pair_strain(s))[cmask] <= 0.0))
    co = hessian_coeffs(y, pot, part)
    return StabilityGapReport(
        c_atomistic=c_atom,
        c_qc=c_qc,
        gap=gap,
        apost_bound=c_qc - gap,
        concavity_ok=concave,
        min_A=float(co.A.min()),
        min_A_tilde=float(co.A_tilde.min()),
        max_coeff_gap=float(np.abs(co.A - co.A_tilde).max()),
    )


def uniform_constants(F: float, pot: Potential) -> tuple[float, float]:
    """``A = phi''(F) + 4 phi''(2F)`` and ``B = -phi''(2F)``."""
    return float(pot.d2(F) + 4 * pot.d2(2 * F)), float(-pot.d2(2 * F))


def uniform_spectrum(F: float, pot: Potential, N: int) -> np.ndarray:
    """Sorted U^{1,2} spectrum of the atomistic Hessian at ``y = F x``.

    The Hessian is ``A I + B L`` on mean-zero bond vectors with ``L`` the
    periodic second-difference matrix, whose nonzero eigenvalues are
    ``4 sin^2(j pi / N)``, j = 1..N-1.
    """
    if not F > 0:
        raise ValueError("F must be positive")
    A, B = uniform_constants(F, pot)
    j = np.arange(1, N)
    return np.sort(A + B * 4.0 * np.sin(j * np.pi / N) ** 2)


def crack_state(F: float, N: int, crack: int) -> Deformation:
    """Strain 1 on every bond except ``crack``, which takes ``F + (N-1)(F-1)``."""
    s = np.ones(N)
    s[crack - 1] = F + (N - 1) * (F - 1)
    y = Deformation.from_strains(s)
    return y


def crack_test_function(N: int, crack: int) -> np.ndarray:
    """Mean-zero ``u`` with ``u' = sqrt(N-1)`` on the crack and ``-1/sqrt(N-1)`` elsewhere."""
    g = np.full(N, -1.0 / math.sqrt(N - 1))
    g[crack - 1] = math.sqrt(N - 1)
    return integrate_strain(g, 1.0 / N)


@dataclass(frozen=True)
class CrackDemo:
    F: float
    N: int
    crack: int
    y: Deformation = field(repr=False)
    u: np.ndarray = field(repr=False)
    u_norm: float
    A_hat: float
    eps_A_hat: float
    A_crack: float
    quotient: float
    quotient_qc: float
    c_atomistic: float | None = None
    c_qc: float | None = None

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k not in ("y", "u")}
        return d


def _crack_ok(pot: Potential, F: float, N: int) -> bool:
    big = F + (N - 1) * (F - 1)
    A_crack = pot.d2(big) + 4 * pot.d2(big + 1.0)
    return big >= pot.r_cut and A_crack <= 0


def crack_demo(
    F: float,
    pot: Potential,
    N: int,
    crack: int | None = None,
    part: RegionPartition | None = None,
    eigen: bool = True,
) -> CrackDemo:
    """Evaluate the single-crack test function on both Hessians.

    ``part`` defaults to the pure Cauchy-Born partition.
    """
    if pot.r_cut is None or not pot.r_cut > pot.r_star:
        raise ValueError("crack demonstration needs a potential with a cutoff r_cut > r_star")
    if not F > 1:
        raise ValueError("crack demonstration needs F > 1")
    if not _crack_ok(pot, F, N):
        n_min = N
        while not _crack_ok(pot, F, n_min):
            n_min += 1
        raise ValueError(
            f"N={N} too small: crack bond must exceed r_cut={pot.r_cut} with A <= 0; "
            f"smallest admissible N is {n_min}"
        )
    crack = N // 2 if crack is None else crack
    part = empty_partition(N) if part is None else part
    eps = 1.0 / N
    y = crack_state(F, N, crack)
    u = crack_test_function(N, crack)
    g = diff1(u, eps)
    co = hessian_coeffs(y, pot, part)
    A_hat = float(pot.d2(1.0) + 4 * pot.d2(2.0))
    q = rayleigh_quotient("atomistic", y, pot, u)
    q_qc = rayleigh_quotient("qnl", y, pot, u, part)
    c_atom = c_qc = None
    if eigen:
        c_atom = stability_constant("atomistic", y, pot).constant
        c_qc = stability_constant("qnl", y, pot, part).constant
    return CrackDemo(
        F=F,
        N=N,
        crack=crack,
        y=y,
        u=u,
        u_norm=lp_norm(g, 2, eps),
        A_hat=A_hat,
        eps_A_hat=eps * A_hat,
        A_crack=float(co.A[crack - 1]),
        quotient=q,
        quotient_qc=q_qc,
        c_atomistic=c_atom,
        c_qc=c_qc,
    )


def random_admissible_state(
    rng: np.random.Generator,
    N: int,
    pot: Potential,
    hi: float = 1.3,
    smooth_passes: int = 2,
) -> Deformation:
    """Strains uniform on ``[max(r_star/2, 0.8), hi]``, then nearest-neighbour averaged."""
    lo = max(pot.r_star / 2, 0.8)
    s = rng.uniform(lo, hi, size=N)
    for _ in range(smooth_passes):
        s = (np.roll(s, 1) + s + np.roll(s, -1)) / 3.0
    return Deformation.from_strains(s)


def random_partition(rng: np.random.Generator, N: int) -> RegionPartition:
    """A random atomistic interval; occasionally the empty or full partition."""
    kind = rng.integers(0, 10)
    if kind == 0:
        return empty_partition(N)
    if kind == 1:
        return make_partition(N, range(1, N + 1))
    length = int(rng.integers(1, N - 1))  # leaves at least two continuum atoms
    start = int(rng.integers(1, N + 1))
    return make_partition(N, [(start - 1 + k) % N + 1 for k in range(length)])
