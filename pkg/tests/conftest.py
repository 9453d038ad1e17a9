import numpy as np
import pytest

from fiberctl import (FiberGeometry, SafetyLimits, ScanParams, ThermalParams,
                      Workspace, default_config)


@pytest.fixture(scope="session")
def geom() -> FiberGeometry:
    return FiberGeometry()


@pytest.fixture(scope="session")
def limits() -> SafetyLimits:
    return SafetyLimits()


@pytest.fixture(scope="session")
def thermal() -> ThermalParams:
    return ThermalParams()


@pytest.fixture(scope="session")
def scan() -> ScanParams:
    return ScanParams()


@pytest.fixture(scope="session")
def config():
    return default_config()


@pytest.fixture(scope="session")
def workspace(thermal, limits) -> Workspace:
    return Workspace(thermal, limits)


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
