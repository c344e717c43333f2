import pytest

from qstream import QoETarget, Rates


@pytest.fixture(scope="session")
def rates():
    """Canonical rate pair used throughout: free 1.05, paid 0.15."""
    return Rates(1.05, 0.15)


@pytest.fixture(scope="session")
def target20():
    return QoETarget(20.0, 1e-3)


@pytest.fixture(scope="session")
def target35():
    return QoETarget(35.0, 1e-3)
