"""Shared fixtures: embedding caches and candidate pools are expensive to
build, so the suite constructs each (kernel, measure) pair once."""

import numpy as np
import pytest

from condgrad import Gaussian, Matern32, UniformBox
from condgrad.herding import CandidatePool, get_embedding_cache


@pytest.fixture(scope="session")
def gauss_uniform_1d():
    kernel, measure = Gaussian(), UniformBox(1)
    cache = get_embedding_cache(kernel, measure)
    _ = cache.c_mu
    return kernel, measure, cache, CandidatePool(cache)


@pytest.fixture(scope="session")
def matern32_uniform_2d():
    kernel, measure = Matern32(), UniformBox(2)
    cache = get_embedding_cache(kernel, measure)
    _ = cache.c_mu
    return kernel, measure, cache, CandidatePool(cache)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240811)
