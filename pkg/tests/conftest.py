import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from slca.problems import paper_problem
from slca.spiking import SpikingConfig, simulate

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def paper():
    return paper_problem()


@pytest.fixture(scope="session")
def paper_log(paper):
    return simulate(paper, SpikingConfig.for_problem(paper, t_end=100.0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
