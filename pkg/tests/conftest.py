import math

import pytest
from hypothesis import HealthCheck, settings

from delaysync.graph import gen_directed_ring, laplacian_spectrum
from delaysync.sl_model import SLParams, sl_equilibrium_model

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def sl_stable():
    return sl_equilibrium_model(SLParams(-1.0, math.pi))


@pytest.fixture
def sl_unstable():
    return sl_equilibrium_model(SLParams(1.0, math.pi))


@pytest.fixture
def ring4_spectrum():
    return laplacian_spectrum(gen_directed_ring(4))
