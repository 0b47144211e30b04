"""Shared fixtures for the twindot test suite"""

import pytest

from twindot.core.data_models import Params
from twindot.core.model import load_preset


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: figure-scale master-equation runs")


@pytest.fixture
def small_pair() -> Params:
    """Resonant uncoupled pair at a truncation small enough for unit tests"""
    return load_preset("paper-default").replace(fock_dim=3)


@pytest.fixture
def single_dot() -> Params:
    return load_preset("single-qd").replace(fock_dim=3)


@pytest.fixture
def empty_cavity() -> Params:
    """No dot-cavity coupling: the cavity reflects like a bare Fabry-Perot"""
    return Params(g=0.0, fock_dim=4, P_laser=1e-12)
