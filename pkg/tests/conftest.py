import numpy as np
import pytest

from evdep.empirical import pseudo_observations
from evdep.models import PickandsModel
from evdep.numerics import RngStream


@pytest.fixture
def three_point():
    # pseudo x = (.25, .5, .75), pseudo y = (.5, .25, .75)
    return pseudo_observations([[1, 2], [2, 1], [3, 3]])


@pytest.fixture
def gumbel2():
    return PickandsModel("gumbel", 2.0)


@pytest.fixture
def gumbel_sample():
    def make(n, stream=0, seed=123):
        return pseudo_observations(PickandsModel("gumbel", 2.0).sample(n, RngStream(seed, stream)))

    return make


def random_pseudo(rng, n):
    x = rng.standard_normal((n, 2))
    x[:, 1] += x[:, 0]
    return pseudo_observations(x)
