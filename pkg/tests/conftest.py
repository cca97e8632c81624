import numpy as np
import pytest

from quadnest import NestBudgets, build_nest, invariant_interval, practical_constants


@pytest.fixture(scope="session")
def m19():
    return invariant_interval("1.9")


@pytest.fixture(scope="session")
def nest19(m19):
    rep = build_nest(m19, 3)
    assert len(rep.levels) == 3
    return rep


@pytest.fixture(scope="session")
def nest18():
    rep = build_nest(invariant_interval("1.8"), 3)
    assert len(rep.levels) == 3
    return rep


@pytest.fixture(scope="session")
def consts():
    return practical_constants()


@pytest.fixture()
def rng():
    return np.random.default_rng(20260810)
