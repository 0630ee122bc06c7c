from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from neumannhole.assembly import assemble
from neumannhole.geometry import DomainSpec, HoleSpec, triangulate
from neumannhole.potential import PotentialModel

settings.register_profile("default", deadline=None, max_examples=30,
                          suppress_health_check=[HealthCheck.too_slow,
                                                 HealthCheck.function_scoped_fixture])
settings.load_profile("default")


@pytest.fixture(scope="session")
def square():
    return DomainSpec.unit_square()


@pytest.fixture(scope="session")
def coarse_parent(square):
    return triangulate(square, None, 1 / 32)


@pytest.fixture(scope="session")
def coarse_disk(square, coarse_parent):
    return triangulate(square, HoleSpec(kind="disk", center=(0.5, 0.5), eps=0.2), 1 / 32,
                       parent=coarse_parent)


@pytest.fixture(scope="session")
def fp_square_b1(coarse_parent):
    return assemble(coarse_parent, PotentialModel.uniform(1.0))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
