import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

E1 = math.exp(-1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
