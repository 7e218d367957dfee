import pytest

from repremia.dist import exponential, pareto
from repremia.premium import PremiumParams
from repremia.riskmeasure import Distortion


@pytest.fixture
def expo():
    return exponential(2.0)


@pytest.fixture
def par():
    return pareto(2.0, 2.0)


@pytest.fixture
def scheme():
    """delta=1, theta0=1, theta1=0.5, theta2=2: d_I = a/2, u_I = 2a."""
    return PremiumParams(1.0, 1.0, 0.5, 2.0)


@pytest.fixture
def tvar02():
    return Distortion.tvar(0.2)
