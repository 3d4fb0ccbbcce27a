from __future__ import annotations

import numpy as np
import pytest

from glminmax.manifold import flat_torus, unit_sphere


@pytest.fixture(scope="session")
def sphere():
    return unit_sphere(2)


@pytest.fixture(scope="session")
def torus2():
    return flat_torus(2, 16)


@pytest.fixture(scope="session")
def torus3():
    return flat_torus(3, 8)


@pytest.fixture(params=["sphere", "torus2", "torus3"])
def mesh(request):
    return request.getfixturevalue(request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
