import pytest

from mildbbm.asymptotics import ModelParams
from mildbbm.environment import sample_environment


@pytest.fixture(scope="session")
def params1():
    return ModelParams(nu=1.0, a=0.5, beta1=0.0, beta2=1.0)


@pytest.fixture(scope="session")
def field1(params1):
    return sample_environment(1, params1, 20.0, seed=11)


@pytest.fixture(scope="session")
def field2():
    return sample_environment(2, ModelParams(nu=0.5, a=0.5, beta1=0.25, beta2=1.0), 8.0, seed=12)
