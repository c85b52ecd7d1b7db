from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from _oracles import central_first, energy_loop, random_mean_zero
from qnlqc.calculus import diff1
from qnlqc.chain import (
    AdmissibilityError,
    ChainConfig,
    Deformation,
    admissibility,
    energy_atomistic,
    grad_atomistic,
    hessian_atomistic,
    total_energy,
)
from qnlqc.estimate import random_admissible_state


def test_config_validation():
    assert ChainConfig(8, 1.0).eps == 0.125
    np.testing.assert_allclose(ChainConfig(4, 1.0).x, [0.25, 0.5, 0.75, 1.0])
    for bad in [(3, 1.0), (8, 0.0), (8, -1.0), (7.5, 1.0)]:
        with pytest.raises(ValueError):
            ChainConfig(*bad)


def test_deformation_projection_and_strains(rng):
    cfg = ChainConfig(10, 1.1)
    u = rng.standard_normal(10) * 0.01 + 3.0
    y = Deformation(cfg, u)
    assert abs(y.u.sum()) < 1e-13
    assert y.strain.mean() == pytest.approx(1.1)
    np.testing.assert_allclose(np.diff(y.y), y.strain[1:] * cfg.eps)
    with pytest.raises(ValueError):
        Deformation(cfg, np.zeros(9))


def test_from_strains_round_trip(rng):
    s = rng.uniform(0.9, 1.2, 12)
    y = Deformation.from_strains(s)
    np.testing.assert_allclose(y.strain, s, atol=1e-13)
    assert y.F == pytest.approx(s.mean())


def test_csv_round_trip_exact(rng, tmp_path):
    y = random_admissible_state(rng, 17, __import__("qnlqc").lennard_jones())
    path = tmp_path / "y.csv"
    text = y.to_csv(path)
    assert text.splitlines()[0] == "xi,u,strain"
    z = Deformation.from_csv(path, y.F)
    assert np.array_equal(z.u, y.u)
    assert np.array_equal(Deformation.from_csv_text(text, y.F).u, y.u)


def test_admissibility(lj):
    s = np.array([1.0, 1.0, 0.5, 1.5])
    y = Deformation.from_strains(s)
    rep = admissibility(y, lj)
    assert rep.min_strain == pytest.approx(0.5)
    assert not rep.concave_ok
    assert admissibility(y, lj, continuum_bonds={1, 2}).r_lb == pytest.approx(2.0)
    bad = Deformation.from_strains(np.array([1.5, 1.5, -0.2, 1.2]))
    with pytest.raises(AdmissibilityError) as e:
        energy_atomistic(bad, lj)
    assert e.value.bond == 3


def test_uniform_energy(lj):
    y = Deformation.uniform(ChainConfig(16, 1.07))
    assert energy_atomistic(y, lj) == pytest.approx(lj(1.07) + lj(2.14))


def test_energy_matches_loop_oracle(rng, lj, morse4):
    for pot in (lj, morse4):
        for _ in range(5):
            y = random_admissible_state(rng, int(rng.integers(6, 30)), pot)
            assert energy_atomistic(y, pot) == pytest.approx(energy_loop(y, pot), rel=1e-12)


@given(st.integers(6, 40), st.integers(0, 2**32 - 1))
def test_gradient_central_difference(N, seed):
    from qnlqc.potentials import lennard_jones

    pot = lennard_jones()
    rng = np.random.default_rng(seed)
    y = random_admissible_state(rng, N, pot)
    v = random_mean_zero(rng, N, 1e-2)
    E = lambda w: energy_atomistic(y.displaced(w - y.u), pot)  # noqa: E731
    fd = central_first(E, y.u, v, h=1e-5)
    ex = grad_atomistic(y, pot)(v)
    assert abs(fd - ex) <= 1e-6 * max(abs(ex), 1e-3)


def test_hessian_central_difference(rng, lj):
    for _ in range(10):
        N = int(rng.integers(6, 40))
        y = random_admissible_state(rng, N, lj)
        v = random_mean_zero(rng, N, 1e-2)
        w = random_mean_zero(rng, N, 1e-2)
        G = lambda u: grad_atomistic(y.displaced(u - y.u), lj)(w)  # noqa: E731
        fd = central_first(G, y.u, v, h=1e-5)
        ex = hessian_atomistic(y, lj).form_u(v, w)
        assert abs(fd - ex) <= 1e-4 * max(abs(ex), 1e-3)


def test_strain_hessian_dense_and_apply(rng, lj):
    y = random_admissible_state(rng, 11, lj)
    H = hessian_atomistic(y, lj)
    K = H.dense()
    assert np.allclose(K, K.T)
    g = rng.standard_normal(11)
    np.testing.assert_allclose(K @ g, H.matvec(g), atol=1e-12)
    u, v = random_mean_zero(rng, 11), random_mean_zero(rng, 11)
    assert H.apply(u)(v) == pytest.approx(H.form_u(u, v), rel=1e-12)
    assert H.form(diff1(u, y.eps), diff1(v, y.eps)) == pytest.approx(H.form_u(v, u), rel=1e-12)


def test_total_energy_load_term(lj):
    y = Deformation.uniform(ChainConfig(8, 1.0))
    f = np.array([1.0, -1.0, 0, 0, 0, 0, 0, 0])
    assert total_energy(1.5, y, None) == 1.5
    # only the displacement part pairs with f; Fx contributes a constant -F*eps^2*sum(xi f_xi)
    expected = 1.5 - y.eps * np.dot(f, y.y)
    assert total_energy(1.5, y, f) == pytest.approx(expected)
