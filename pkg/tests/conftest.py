import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("siren", deadline=None, max_examples=40)
settings.load_profile("siren")


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
