"""Acceptance suite: one pass/fail test per acceptance criterion.

Each test asserts its numerical claim and its wall-clock budget.
Tolerances are pinned exactly as stated by the acceptance criteria.
"""

from __future__ import annotations

import math
import time

import numpy as np
import pytest

from _oracles import central_first, energy_loop, kkt_dual_norm, random_mean_zero
from qnlqc.calculus import bond_form_to_load, diff1, dual_norm, lp_norm
from qnlqc.certify import apost_certificate, apriori_certificate
from qnlqc.chain import ChainConfig, Deformation, energy_atomistic, grad_atomistic, hessian_atomistic
from qnlqc.estimate import (
    apost_stability_report,
    consistency_report,
    crack_demo,
    random_admissible_state,
    random_partition,
    truncation_functional,
    truncation_grouped,
    uniform_constants,
)
from qnlqc.potentials import lennard_jones, lennard_jones_cutoff
from qnlqc.qc import (
    atomistic_coefficient_form,
    empty_partition,
    energy_qnl,
    grad_qnl,
    hessian_coeffs,
    hessian_qnl,
    make_partition,
    qnl_coefficient_form,
)
from qnlqc.solve import newton_solve, stability_constant


class Budget:
    def __init__(self, seconds):
        self.seconds = seconds

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0
        return False

    def check(self):
        assert self.elapsed < self.seconds, f"took {self.elapsed:.2f} s, budget {self.seconds} s"


def quarter(N):
    return make_partition(N, [xi for xi in range(1, N + 1) if 0.375 < xi / N <= 0.625])


def test_criterion_1_uniform_spectrum():
    with Budget(1.0) as b:
        pot = lennard_jones()
        N = 32
        eps = 1 / N
        y = Deformation.uniform(ChainConfig(N, 1.0))
        res = stability_constant("atomistic", y, pot, full_spectrum=True)
        num = np.sort(res.spectrum)
        A, B = uniform_constants(1.0, pot)
        j = np.arange(1, N)
        literal = np.sort(A + B * 4 * np.sin(0.5 * j * np.pi * eps) ** 2)
    b.check()
    assert abs(res.constant - (A + 4 * B * math.sin(math.pi * eps) ** 2)) <= 1e-10
    dev = np.abs(num - literal).max()
    assert dev <= 1e-9, f"eigenvalues differ from A + B*4 sin^2(j pi eps / 2) by up to {dev:.3e}"


def test_criterion_2_hessian_identity():
    with Budget(10.0) as b:
        pot = lennard_jones()
        rng = np.random.default_rng(2)
        N = 48
        worst = 0.0
        for _ in range(100):
            y = random_admissible_state(rng, N, pot, smooth_passes=int(rng.integers(0, 3)))
            part = random_partition(rng, N)
            co = hessian_coeffs(y, pot, part)
            for direct, via in (
                (hessian_atomistic(y, pot).dense(), atomistic_coefficient_form(co, y.eps).dense()),
                (hessian_qnl(y, pot, part).dense(), qnl_coefficient_form(co, part, y.eps).dense()),
            ):
                worst = max(worst, np.abs(direct - via).max() / np.abs(direct).max())
    b.check()
    assert worst <= 1e-12


def test_criterion_3_consistency_bound():
    with Budget(60.0) as b:
        pot = lennard_jones()
        rng = np.random.default_rng(3)
        violations = []
        worst_assembly = 0.0
        draws = 0
        for k in range(1000):
            N = (16, 32, 64)[k % 3]
            y = random_admissible_state(rng, N, pot, smooth_passes=int(rng.integers(0, 4)))
            part = random_partition(rng, N)
            T = truncation_functional(y, pot, part, check=False).coeffs
            G = truncation_grouped(y, pot, part).coeffs
            worst_assembly = max(worst_assembly, np.abs(T - G).max())
            for p in (1, 2, math.inf):
                r = consistency_report(y, pot, part, p)
                draws += 1
                if not r.holds:
                    violations.append((N, p, r.measured, r.bound))
    b.check()
    assert draws == 3000
    assert not violations, violations[:5]
    assert worst_assembly <= 1e-13


def test_criterion_4_stability_bounds():
    with Budget(30.0) as b:
        pot = lennard_jones()
        rng = np.random.default_rng(4)
        bad = []
        for _ in range(50):
            N = int(rng.integers(8, 65))
            y = random_admissible_state(rng, N, pot, smooth_passes=int(rng.integers(0, 3)))
            assert y.strain.min() >= pot.r_star / 2
            part = random_partition(rng, N)
            rep = apost_stability_report(y, pot, part)
            lower_ok = rep.c_atomistic >= rep.min_A - 1e-10 and rep.c_qc >= rep.min_A_tilde - 1e-10
            if not (rep.concavity_ok and lower_ok and rep.holds):
                bad.append(rep)
    b.check()
    assert not bad, bad[:3]


def test_criterion_5_crack_demonstration():
    with Budget(5.0) as b:
        d = crack_demo(1.2, lennard_jones_cutoff(), 128)
    b.check()
    bound = d.eps_A_hat * (1 + 1e-12)
    assert d.c_qc <= bound
    assert d.c_atomistic <= bound, f"c = {d.c_atomistic!r} exceeds eps*A_hat = {d.eps_A_hat!r}"
    assert d.quotient <= bound, f"quotient = {d.quotient!r} exceeds eps*A_hat = {d.eps_A_hat!r}"


def _fd_errors(model, y, pot, part, rng):
    v = random_mean_zero(rng, y.N, 1e-2)
    w = random_mean_zero(rng, y.N, 1e-2)
    if model == "atomistic":
        E = lambda u: energy_atomistic(y.displaced(u - y.u), pot)  # noqa: E731
        G = lambda u: grad_atomistic(y.displaced(u - y.u), pot)(w)  # noqa: E731
        g, H = grad_atomistic(y, pot)(v), hessian_atomistic(y, pot).form_u(v, w)
    else:
        E = lambda u: energy_qnl(y.displaced(u - y.u), pot, part)  # noqa: E731
        G = lambda u: grad_qnl(y.displaced(u - y.u), pot, part)(w)  # noqa: E731
        g, H = grad_qnl(y, pot, part)(v), hessian_qnl(y, pot, part).form_u(v, w)
    eg = abs(central_first(E, y.u, v, 1e-5) - g) / max(abs(g), 1e-3)
    eh = abs(central_first(G, y.u, v, 1e-5) - H) / max(abs(H), 1e-3)
    return eg, eh


def test_criterion_6_derivative_checks():
    with Budget(10.0) as b:
        pot = lennard_jones()
        rng = np.random.default_rng(6)
        worst = {}
        for model in ("atomistic", "qnl"):
            for _ in range(20):
                N = int(rng.integers(6, 40))
                y = random_admissible_state(rng, N, pot)
                part = random_partition(rng, N)
                # the vectorised energies agree with an explicit loop
                ref = energy_loop(y, pot, None if model == "atomistic" else part.atomistic)
                val = energy_atomistic(y, pot) if model == "atomistic" else energy_qnl(y, pot, part)
                assert val == pytest.approx(ref, rel=1e-12)
                eg, eh = _fd_errors(model, y, pot, part, rng)
                wg, wh = worst.get(model, (0.0, 0.0))
                worst[model] = (max(wg, eg), max(wh, eh))
    b.check()
    for model, (eg, eh) in worst.items():
        assert eg <= 1e-6, (model, eg)
        assert eh <= 1e-4, (model, eh)


def test_criterion_7_dual_norm_oracle():
    with Budget(5.0) as b:
        rng = np.random.default_rng(7)
        worst = 0.0
        for _ in range(100):
            N = int(rng.integers(2, 17))
            eps = 1 / N
            t = rng.standard_normal(N) * 10 ** rng.uniform(-2, 2)
            worst = max(worst, abs(dual_norm(t, 2, eps) - kkt_dual_norm(t, eps)))
    b.check()
    assert worst <= 1e-10


def test_criterion_8_end_to_end_certificates():
    with Budget(60.0) as b:
        pot = lennard_jones()
        Ns = (64, 128, 256)
        rows = []
        for N in Ns:
            f = 0.1 * np.sin(2 * np.pi * np.arange(1, N + 1) / N)
            f -= f.mean()
            part = quarter(N)
            y0 = Deformation.uniform(ChainConfig(N, 1.05))
            ya = newton_solve("atomistic", y0, pot, f).y
            yq = newton_solve("qnl", y0, pot, f, part).y
            ca = apriori_certificate(ya, pot, part, f)
            cp = apost_certificate(yq, pot, part, f)
            err = lp_norm(diff1(ya.u - yq.u, ya.eps), 2, ya.eps)
            rows.append((N, ca, cp, err))
    b.check()
    for N, ca, cp, err in rows:
        assert ca.certified and cp.certified, (N, ca.verdict, cp.verdict)
        assert err <= ca.error_bound and err <= cp.error_bound, (N, err, ca.error_bound, cp.error_bound)
    logN = np.log([r[0] for r in rows])
    for k in (1, 2):
        bounds = [r[k].error_bound for r in rows]
        assert all(b2 < b1 for b1, b2 in zip(bounds, bounds[1:]))
        slope = -np.polyfit(logN, np.log(bounds), 1)[0]
        assert slope >= 0.75, slope


def test_criterion_9_crack_refused():
    with Budget(5.0) as b:
        pot = lennard_jones_cutoff()
        N = 128
        d = crack_demo(1.2, pot, N, eigen=False)
        part = empty_partition(N)
        f = bond_form_to_load(grad_qnl(d.y, pot, part))
        cert = apost_certificate(d.y, pot, part, f)
    b.check()
    assert not cert.certified
    assert cert.reason == "stability"
    assert cert.verdict == "not-certified(stability)"
