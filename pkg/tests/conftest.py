import pytest

from rowgossip import build_directed_ring, build_exponential, compute_metrics, weights_from_indegree


@pytest.fixture(scope="session")
def exp8():
    return weights_from_indegree(build_exponential(8))


@pytest.fixture(scope="session")
def exp8_metrics(exp8):
    return compute_metrics(exp8)


@pytest.fixture(scope="session")
def exp16():
    return weights_from_indegree(build_exponential(16))


@pytest.fixture(scope="session")
def exp16_metrics(exp16):
    return compute_metrics(exp16)


@pytest.fixture(scope="session")
def ring16():
    return weights_from_indegree(build_directed_ring(16))


@pytest.fixture(scope="session")
def ring16_metrics(ring16):
    return compute_metrics(ring16)
