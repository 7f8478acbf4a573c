import numpy as np
import pytest

from zrpsim.environment import EnvDistribution, JumpKernel, sample_environment


@pytest.fixture
def dist():
    return EnvDistribution(c=0.2, beta=3.0)


@pytest.fixture
def nn_kernel():
    return JumpKernel.nearest_neighbor(1)


@pytest.fixture
def small_field(dist):
    return sample_environment(dist, 16, seed=7)


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(1234))
