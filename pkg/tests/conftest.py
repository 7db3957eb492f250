"""Shared fixtures: the expensive reference runs are computed once per session."""

import pytest

from solitonlab.integrate import IntegrationControls
from solitonlab.model import validate_config
from solitonlab.shoot import ShootingParams, solve_einstein, solve_soliton


@pytest.fixture(scope="session")
def cfg_r1():
    return validate_config([2], 1.0)


@pytest.fixture(scope="session")
def cfg_r2():
    return validate_config([2, 3], 1.0)


@pytest.fixture(scope="session")
def soliton_r1(cfg_r1):
    return solve_soliton(cfg_r1)


@pytest.fixture(scope="session")
def soliton_r2(cfg_r2):
    return solve_soliton(cfg_r2)


@pytest.fixture(scope="session")
def soliton_r2_half(cfg_r2):
    # Companion shot at half the perturbation size, used for Richardson
    # refinement of the collapse-end limits; only the early samples matter.
    return solve_soliton(
        cfg_r2, ShootingParams(h=5e-7), IntegrationControls(s_max=40.0, record_every=0.05)
    )


@pytest.fixture(scope="session")
def soliton_r2_long(cfg_r2):
    # Extended horizon for the conical asymptotics; coarse sampling is enough.
    return solve_soliton(cfg_r2, controls=IntegrationControls(s_max=20000.0, record_every=0.5))


@pytest.fixture(scope="session")
def soliton_r1_long(cfg_r1):
    return solve_soliton(cfg_r1, controls=IntegrationControls(s_max=8000.0, record_every=0.5))


@pytest.fixture(scope="session")
def einstein_r1(cfg_r1):
    return solve_einstein(cfg_r1)


@pytest.fixture(scope="session")
def einstein_r2(cfg_r2):
    return solve_einstein(cfg_r2)
