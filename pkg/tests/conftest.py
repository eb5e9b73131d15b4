import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from irs_comp.scenario import ChannelSet

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_channels(rng, n=2, k=1, m=4, nt=2, nr=2, direct_scale=1.0, irs_scale=1.0):
    return ChannelSet(
        direct_scale * crandn(rng, n, k, nr, nt),
        irs_scale * crandn(rng, n, m, nt),
        irs_scale * crandn(rng, k, nr, m),
    )


def random_unit(rng, m):
    return np.exp(2j * np.pi * rng.random(m))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
