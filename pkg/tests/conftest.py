import random

import pytest

from ppkda import paillier
from ppkda.fixedpoint import FixedPointParams


@pytest.fixture(scope="session")
def keypair():
    """One deterministic 512-bit key pair shared by the whole suite."""
    return paillier.keygen(512, random.Random(0xC0FFEE))


@pytest.fixture(scope="session")
def pk(keypair):
    return keypair[0]


@pytest.fixture(scope="session")
def sk(keypair):
    return keypair[1]


@pytest.fixture(scope="session")
def fp():
    return FixedPointParams()


@pytest.fixture
def small_fp():
    # Tiny comparison range for exhaustive tests.
    return FixedPointParams(frac_bits=1, value_bits=5, stat_sec=24)
