import pytest
from hypothesis import HealthCheck, settings

from oudividend.barrier import Horizon
from oudividend.ou_kernel import OUParams
from oudividend.value import SurplusParams

settings.register_profile("default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def ou():
    return OUParams(1.0, 0.51, 1.0)


@pytest.fixture
def horizon():
    return Horizon(5.0)


@pytest.fixture
def surplus():
    return SurplusParams(1.0, 0.5, 1.0)
