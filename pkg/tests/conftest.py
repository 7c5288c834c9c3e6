import numpy as np
import pytest

from cavityspdc import BiphotonParams, default_config


@pytest.fixture(scope="session")
def cfg():
    return default_config()


@pytest.fixture(scope="session")
def ppktp0(cfg):
    return cfg.ppktp0


@pytest.fixture(scope="session")
def ppktp1(cfg):
    return cfg.ppktp1


@pytest.fixture(scope="session")
def chain(cfg):
    return cfg.chain


@pytest.fixture(scope="session")
def source_150mw(cfg):
    return cfg.source


@pytest.fixture(scope="session")
def bp0(ppktp0):
    return BiphotonParams.from_cavity(ppktp0)


@pytest.fixture(scope="session")
def bp1(ppktp1):
    return BiphotonParams.from_cavity(ppktp1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
