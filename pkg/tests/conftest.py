import numpy as np
import pytest
from hypothesis import settings, HealthCheck

settings.register_profile(
    "ci",
    derandomize=True,
    max_examples=50,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")


@pytest.fixture
def interval():
    from vjump.measure import UniformInterval
    return UniformInterval(-1.0, 1.0)


@pytest.fixture
def ball2():
    from vjump.measure import UniformBall
    return UniformBall(2, 1.0)


@pytest.fixture
def ball3():
    from vjump.measure import UniformBall
    return UniformBall(3, 1.0)


@pytest.fixture
def skewed_atoms():
    from vjump.measure import Atomic
    return Atomic([[-1.0], [1.0]], [0.25, 0.75])


@pytest.fixture
def tabulated3():
    # constant radial profile on the unit ball in 3-D; integrates against
    # the same kernels as UniformBall(3, 1) up to tabulation error
    from vjump.measure import TabulatedRadial
    return TabulatedRadial(3, 1.0, np.ones(33))
