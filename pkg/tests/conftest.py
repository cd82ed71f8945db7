import functools

import pytest
from hypothesis import HealthCheck, settings

from vbtsim import preset

# every randomized invariant runs at least 100 seeded cases
settings.register_profile("vbtsim", max_examples=100, deadline=None, derandomize=True,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("vbtsim")


@functools.lru_cache(maxsize=None)
def cached_preset(name):
    return preset(name)


@pytest.fixture
def ctac():
    return cached_preset("c-tac")


@pytest.fixture
def csight():
    return cached_preset("c-sight")


@pytest.fixture
def vicsight():
    return cached_preset("vi-c-sight")


@pytest.fixture
def victac():
    return cached_preset("vi-c-tac")
