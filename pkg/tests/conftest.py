import numpy as np
import pytest

from twogroups import MixingDistribution, TwoGroupsModel


@pytest.fixture(scope="session")
def example_model():
    """The worked-example generator: p0 = 0.9, N(0,1) null, g = Normal(2.5, 0.5)."""
    return TwoGroupsModel(p0=0.9, g=MixingDistribution.normal(2.5, 0.5))


@pytest.fixture(scope="session")
def example_panel(example_model):
    panel, effects = example_model.sample_panel(3000, seed=0)
    return panel, effects


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
