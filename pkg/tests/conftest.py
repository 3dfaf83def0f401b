import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_state(q, rng):
    v = rng.normal(size=1 << q) + 1j * rng.normal(size=1 << q)
    return v / np.linalg.norm(v)


def random_ket(rng):
    return random_state(1, rng)
