import numpy as np
import pytest

from odoprime.oracle import FiniteQuotient
from odoprime.return_map import ReturnMap
from odoprime.schedule import AlphabetSchedule


@pytest.fixture(scope="session")
def paper():
    return AlphabetSchedule.paper(12)


@pytest.fixture(scope="session")
def desk():
    return AlphabetSchedule.preset("desk")


@pytest.fixture(scope="session")
def desk2():
    return AlphabetSchedule.preset("desk2")


@pytest.fixture(scope="session")
def lab():
    return AlphabetSchedule.preset("lab")


@pytest.fixture(scope="session")
def lab_rm(lab):
    return ReturnMap.of(lab)


@pytest.fixture(scope="session")
def desk_rm(desk):
    return ReturnMap.of(desk)


@pytest.fixture(scope="session")
def small_quotients():
    """(engine, oracle) pairs on quotients small enough for exhaustive sweeps."""
    out = {}
    for name, L in (("paper", 4), ("desk", 5), ("desk2", 6), ("lab", 3)):
        s = AlphabetSchedule.preset(name, L)
        out[name] = (ReturnMap.of(s), FiniteQuotient(s, L))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
