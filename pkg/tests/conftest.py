import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mlfgm.factorization import build_factorized_problem
from mlfgm.verify import random_problem

settings.register_profile(
    "default",
    max_examples=30,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_problem(rng):
    """Random square 4-vertex, 2-layer factorized problem with unary terms."""
    return build_factorized_problem(random_problem(rng, 4, n_layers=2, unary=True))
