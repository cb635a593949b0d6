import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "replab",
    deadline=None,
    max_examples=50,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("replab")


@pytest.fixture
def pd_matrix():
    return np.array([[3.0, 0.0], [5.0, 1.0]])


@pytest.fixture
def mixed_dominance_matrix():
    # strategy 0 loses to the even mix of 1 and 2, but to neither alone
    return np.array([[2.0, 2.0, 2.0], [4.0, 1.0, 1.0], [1.0, 4.0, 4.0]])


@pytest.fixture
def coordination_matrix():
    return 2.0 * np.eye(3)


@pytest.fixture
def attrition_testbed_matrix():
    return np.array([[0.5, 0.0, 0.0], [1.0, -0.5, -1.0], [1.0, 0.0, -1.5]])
