"""Existence certificates from a quantitative inverse function theorem.

If ``F(x0)`` has dual norm at most ``eta``, ``||DF(x0)^{-1}|| <= sigma`` and
``DF`` is ``L``-Lipschitz on the ball of radius ``2 eta sigma`` about ``x0``,
then ``2 L sigma^2 eta < 1`` guarantees a root within that ball.  Here the
map is the first variation of either the coupled or the atomistic total
energy on mean-zero displacements with the U^{1,2} norm.

Certificates are computed in floating point.  Strict inequalities are
tested with a relative slack of ``SLACK`` in the conservative direction.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .calculus import lp_norm
from .chain import Deformation, checked_strain, pair_strain
from .estimate import coefficient_gap_bound, consistency_report
from .potentials import Potential
from .qc import RegionPartition, hessian_coeffs
from .solve import SolveError, SolveOptions, newton_solve, residual, stability_constant

__all__ = [
    "SLACK",
    "EQUILIBRIUM_TOL",
    "Certificate",
    "IFTResult",
    "LipschitzEstimate",
    "Soundness",
    "ift_check",
    "lipschitz_estimate",
    "admissible_radius",
    "apriori_certificate",
    "apost_certificate",
    "check_soundness",
    "to_jsonable",
]

SLACK = 1e-9
EQUILIBRIUM_TOL = 1e-10
# order in which failed hypotheses are reported as the reason
CONDITION_ORDER = ("equilibrium", "concavity bound", "stability", "delta1", "ball admissible", "contraction")


@dataclass(frozen=True)
class IFTResult:
    eta: float
    sigma: float
    L: float
    contraction: float
    radius: float
    admissible_radius: float
    error_bound: float
    conditions: dict

    @property
    def certified(self) -> bool:
        return all(self.conditions.values())


def ift_check(eta: float, sigma: float, L: float, admissible_radius: float, slack: float = SLACK) -> IFTResult:
    """Contraction ``2 L sigma^2 eta`` and radius ``2 eta sigma`` with their checks."""
    for name, v in (("eta", eta), ("sigma", sigma), ("L", L), ("admissible_radius", admissible_radius)):
        if not v >= 0:
            raise ValueError(f"{name} must be nonnegative, got {v}")
    contraction = 2.0 * L * sigma**2 * eta
    radius = 2.0 * eta * sigma
    conditions = {
        "ball admissible": bool(radius <= admissible_radius * (1.0 - slack)) or radius == 0.0,
        "contraction": bool(contraction < 1.0 - slack),
    }
    return IFTResult(eta, sigma, L, contraction, radius, admissible_radius, radius, conditions)


@dataclass(frozen=True)
class LipschitzEstimate:
    L_prime: float
    L: float
    delta: float
    r_lb: float
    radius: float


def admissible_radius(y: Deformation, delta: float = 0.5) -> float:
    """Largest U^{1,2} radius whose ball keeps every strain above ``delta min y'``.

    Uses the inverse inequality ``||w'||_inf <= eps^{-1/2} ||w'||_{l2_eps}``.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    return math.sqrt(y.eps) * (1.0 - delta) * float(checked_strain(y).min())


def lipschitz_estimate(
    y: Deformation,
    pot: Potential,
    part: RegionPartition | None,
    radius: float,
    delta: float = 0.5,
) -> LipschitzEstimate:
    """Lipschitz modulus of either Hessian on the U^{1,2} ball of ``radius`` about ``y``.

    ``L' = 9 C3(r_lb)``: one from the nearest-neighbour term and eight from
    the second-neighbour or Cauchy-Born terms, whose arguments move by at
    most twice the strain perturbation and which weight each bond at most
    four times.  ``r_lb`` is the smallest strain reachable in the ball.
    """
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    s_min = float(checked_strain(y).min())
    w_inf = radius / math.sqrt(y.eps)
    if w_inf > (1.0 - delta) * s_min:
        raise ValueError(
            f"ball leaves the admissible set: strain perturbation up to {w_inf:.4g} "
            f"exceeds (1 - delta) min y' = {(1.0 - delta) * s_min:.4g}"
        )
    r_lb = s_min - w_inf
    Lp = 9.0 * pot.sup_abs(3, r_lb)
    return LipschitzEstimate(L_prime=Lp, L=Lp / math.sqrt(y.eps), delta=delta, r_lb=r_lb, radius=radius)


@dataclass(frozen=True)
class Certificate:
    kind: str
    eta: float
    eta_consistency: float
    eta_residual: float
    eta_exact: float
    sigma: float
    L: float
    L_prime: float
    contraction: float
    radius: float
    admissible_radius: float
    error_bound: float
    delta: float
    delta1: float
    conditions: dict
    constants: dict
    provenance: dict = field(default_factory=dict)

    @property
    def certified(self) -> bool:
        return all(self.conditions.values())

    @property
    def reason(self) -> str | None:
        for name in CONDITION_ORDER:
            if not self.conditions.get(name, True):
                return name
        return None

    @property
    def verdict(self) -> str:
        return "certified" if self.certified else f"not-certified({self.reason})"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["certified"] = self.certified
        d["reason"] = self.reason
        d["verdict"] = self.verdict
        return to_jsonable(d)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {k: to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def load_hash(f: np.ndarray | None) -> str:
    if f is None:
        return "zero"
    return hashlib.sha256(np.ascontiguousarray(f, dtype="<f8").tobytes()).hexdigest()[:16]


def _provenance(y: Deformation, pot: Potential, part: RegionPartition, f) -> dict:
    return {
        "potential": pot.describe(),
        "partition": part.describe(),
        "N": y.N,
        "F": y.F,
        "load_hash": load_hash(f),
    }


def _ball(eta, sigma, y, pot, part, delta, conditions):
    """Run the IFT check, tolerating balls that leave the admissible set."""
    adm = admissible_radius(y, delta)
    core = ift_check(eta, sigma, 0.0, adm) if math.isfinite(sigma) else None
    if core is None or not core.conditions["ball admissible"]:
        conditions["ball admissible"] = False
        conditions["contraction"] = False
        radius = 2.0 * eta * sigma
        return math.inf, math.inf, math.inf, radius, adm
    lip = lipschitz_estimate(y, pot, part, core.radius, delta)
    core = ift_check(eta, sigma, lip.L, adm)
    conditions.update(core.conditions)
    return lip.L, lip.L_prime, core.contraction, core.radius, adm


def apriori_certificate(
    y: Deformation,
    pot: Potential,
    part: RegionPartition,
    f: np.ndarray | None = None,
    delta: float = 0.5,
) -> Certificate:
    """Certify a coupled solution near the atomistic equilibrium ``y``.

    ``sigma = 2 / A_min`` with ``A_min = min A_xi``, valid once the
    coefficient gap is at most ``A_min / 2``.
    """
    eps = y.eps
    s = checked_strain(y)
    res = residual("atomistic", y, pot, f).norm(2)
    rep = consistency_report(y, pot, part, 2)
    exact = residual("qnl", y, pot, f, part).norm(2)
    eta = rep.bound + res
    co = hessian_coeffs(y, pot, part)
    A_min = float(co.A.min())
    C3 = rep.C3
    y2c = lp_norm(y.y2(), math.inf, eps, part.continuum)
    gap = coefficient_gap_bound(y, pot, part)
    delta1 = A_min / (8.0 * C3) if C3 > 0 else math.inf

    conditions = {
        "equilibrium": res <= EQUILIBRIUM_TOL,
        "concavity bound": bool(s.min() >= pot.r_star / 2),
        "stability": A_min > 0,
        "delta1": bool(eps * y2c <= delta1) if A_min > 0 else False,
    }
    sigma = 2.0 / A_min if A_min > 0 else math.inf
    L, Lp, contraction, radius, adm = _ball(eta, sigma, y, pot, part, delta, conditions)
    error_bound = 4.0 * eta / A_min if A_min > 0 else math.inf
    return Certificate(
        kind="apriori",
        eta=eta,
        eta_consistency=rep.bound,
        eta_residual=res,
        eta_exact=exact,
        sigma=sigma,
        L=L,
        L_prime=Lp,
        contraction=contraction,
        radius=radius,
        admissible_radius=adm,
        error_bound=error_bound,
        delta=delta,
        delta1=delta1,
        conditions={k: bool(v) for k, v in conditions.items()},
        constants={"A_min": A_min, "C2": rep.C2, "C3": C3, "coefficient_gap": gap, "eps_y2_inf_C": eps * y2c},
        provenance=_provenance(y, pot, part, f),
    )


def apost_certificate(
    y_qc: Deformation,
    pot: Potential,
    part: RegionPartition,
    f: np.ndarray | None = None,
    delta: float = 0.5,
) -> Certificate:
    """Certify an atomistic solution near the coupled equilibrium ``y_qc``.

    ``sigma = 1 / (c_qc - 4 eps C3 ||y''||_inf(C))`` from the a posteriori
    stability bound, which needs concavity of the second-neighbour terms on C.
    """
    eps = y_qc.eps
    s = checked_strain(y_qc)
    res = residual("qnl", y_qc, pot, f, part).norm(2)
    rep = consistency_report(y_qc, pot, part, 2)
    exact = residual("atomistic", y_qc, pot, f).norm(2)
    eta = rep.bound + res
    c_qc = stability_constant("qnl", y_qc, pot, part).constant
    C3 = rep.C3
    y2c = lp_norm(y_qc.y2(), math.inf, eps, part.continuum)
    gap = coefficient_gap_bound(y_qc, pot, part)
    lower = c_qc - gap
    delta1 = c_qc / (8.0 * C3) if C3 > 0 else math.inf
    cmask = ~part.atomistic_mask
    concave = bool(np.all(pot.d2(pair_strain(s))[cmask] <= 0.0))

    conditions = {
        "equilibrium": res <= EQUILIBRIUM_TOL,
        "concavity bound": concave,
        "stability": c_qc > 0 and lower > 0,
        "delta1": bool(eps * y2c <= delta1) if c_qc > 0 else False,
    }
    sigma = 1.0 / lower if lower > 0 else math.inf
    L, Lp, contraction, radius, adm = _ball(eta, sigma, y_qc, pot, part, delta, conditions)
    return Certificate(
        kind="apost",
        eta=eta,
        eta_consistency=rep.bound,
        eta_residual=res,
        eta_exact=exact,
        sigma=sigma,
        L=L,
        L_prime=Lp,
        contraction=contraction,
        radius=radius,
        admissible_radius=adm,
        error_bound=2.0 * eta * sigma,
        delta=delta,
        delta1=delta1,
        conditions={k: bool(v) for k, v in conditions.items()},
        constants={"c_qc": c_qc, "stability_lower": lower, "C2": rep.C2, "C3": C3,
                   "coefficient_gap": gap, "eps_y2_inf_C": eps * y2c},
        provenance=_provenance(y_qc, pot, part, f),
    )


@dataclass(frozen=True)
class Soundness:
    converged: bool
    error: float
    error_bound: float
    within: bool
    counterpart_stability: float | None
    counterpart: Deformation | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("counterpart")
        return to_jsonable(d)


def check_soundness(
    cert: Certificate,
    y0: Deformation,
    pot: Potential,
    part: RegionPartition,
    f: np.ndarray | None = None,
    opts: SolveOptions | None = None,
) -> Soundness:
    """Solve the counterpart model from ``y0`` and compare with the error bound.

    For an a priori certificate the counterpart is the coupled model; for an
    a posteriori one it is the atomistic model.
    """
    model = "qnl" if cert.kind == "apriori" else "atomistic"
    try:
        sol = newton_solve(model, y0, pot, f, part if model == "qnl" else None, opts).y
    except SolveError:
        return Soundness(False, math.inf, cert.error_bound, False, None)
    err = lp_norm(sol.strain - y0.strain, 2, y0.eps)
    c = stability_constant(model, sol, pot, part if model == "qnl" else None).constant
    return Soundness(True, err, cert.error_bound, err <= cert.error_bound, c, sol)
