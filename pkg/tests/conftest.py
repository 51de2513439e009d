import numpy as np
import pytest
from hypothesis import settings

from seqctx import canonical

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def scenario4():
    return canonical.canonical_scenario(2)


@pytest.fixture(scope="session")
def scenario8():
    return canonical.canonical_scenario(3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
