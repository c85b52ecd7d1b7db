from __future__ import annotations

import numpy as np
import pytest
from hypothesis import settings

from qnlqc.potentials import lennard_jones, lennard_jones_cutoff, morse

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def lj():
    return lennard_jones()


@pytest.fixture(scope="session")
def lj_cut():
    return lennard_jones_cutoff(3.2)


@pytest.fixture(scope="session")
def morse4():
    return morse(4.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
