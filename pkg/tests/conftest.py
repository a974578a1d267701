"""Shared instances: the default disc-in-disc plate and solved fields at desk resolution."""

import numpy as np
import pytest

from platelab.presets import default_plate, disc_domain, disc_inclusion
from platelab.solver import CoupleField, build_grid, release_factorizations, solve_dirichlet_form


@pytest.fixture(scope="session")
def domain():
    return disc_domain()


@pytest.fixture(scope="session")
def plate():
    return default_plate()


@pytest.fixture(scope="session")
def couple(domain):
    return CoupleField.default(domain)


@pytest.fixture(scope="session")
def inclusion():
    return disc_inclusion(0.4)


def solve(domain, inclusion, plate, couple, resolution):
    sol = solve_dirichlet_form(build_grid(domain, inclusion, resolution), plate, couple)
    release_factorizations()
    return sol


@pytest.fixture(scope="session")
def solution32(domain, inclusion, plate, couple):
    return solve(domain, inclusion, plate, couple, 32)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
