import numpy as np
import pytest

from stochcuts import builtin, generate_sslp, GeneratorConfig


@pytest.fixture
def thm1():
    return builtin("thm1")


@pytest.fixture
def refinement_example():
    return builtin("refinement-example")


@pytest.fixture
def small_sslp():
    def make(seed=0, sites=3, clients=4, scenarios=4, **kw):
        return generate_sslp(GeneratorConfig(sites=sites, clients=clients,
                                             scenarios=scenarios, seed=seed,
                                             **kw))
    return make


@pytest.fixture
def rng():
    return np.random.default_rng(20260816)
