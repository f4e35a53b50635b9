import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

import pytest

from freewalk import (WeightedFreeGroup, default_params, uniform_ps_measure,
                      measure_constants)


@pytest.fixture(scope="session")
def f2():
    return WeightedFreeGroup(2)


@pytest.fixture(scope="session")
def f3():
    return WeightedFreeGroup(3)


@pytest.fixture(scope="session")
def params2(f2):
    return default_params(f2)


@pytest.fixture(scope="session")
def nu2(f2, params2):
    return uniform_ps_measure(f2, params2)


@pytest.fixture(scope="session")
def constants2(nu2, params2):
    return measure_constants(nu2, params2, max_len=3, ds=(0, 1))
