import pytest

from ckt_prolong import checks
from ckt_prolong.tensor import CURVED


@pytest.fixture(scope="session")
def rank1():
    return checks.system(1)


@pytest.fixture(scope="session")
def rank1_curved():
    return checks.system(1, CURVED)


@pytest.fixture(scope="session")
def rank2():
    return checks.system(2)
