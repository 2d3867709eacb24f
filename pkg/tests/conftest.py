import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", suppress_health_check=[HealthCheck.too_slow], deadline=None
)
settings.load_profile("default")


@pytest.fixture
def two_arm_bandit():
    from opbandit.core import BanditInstance

    return BanditInstance((0.6, 0.4))


@pytest.fixture
def five_arm_bandit():
    from opbandit.core import BanditInstance

    return BanditInstance((0.05, 0.1, 0.15, 0.2, 0.25))


def assert_sorted_unique(arr):
    arr = np.asarray(arr)
    assert np.all(np.diff(arr) > 0)
