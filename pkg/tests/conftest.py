import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nlpa_mimo.link_metrics import LinkBudget

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def budget():
    return LinkBudget.from_dbm()
