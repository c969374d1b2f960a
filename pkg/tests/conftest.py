import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "proxkit", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("proxkit")


@pytest.fixture
def qp2():
    from proxkit.problems import QpInstance

    return QpInstance(np.array([[2.0, 0.0], [0.0, 1.0]]), np.array([-1.0, 0.0]))
