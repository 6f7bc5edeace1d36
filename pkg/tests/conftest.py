import numpy as np
import pytest

from cgmi.oracle import LocalOracle
from cgmi.scenario import make_planted_scenario


@pytest.fixture(scope="session")
def scenario():
    return make_planted_scenario(seed=0, num_classes=10, style_samples=2000)


@pytest.fixture(scope="session")
def small_scenario():
    return make_planted_scenario(seed=3, num_classes=4, latent_dim=6, style_dim=6, sample_dim=8,
                                 train_per_class=12, style_samples=500)


@pytest.fixture
def target(scenario):
    return LocalOracle(scenario.target)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
