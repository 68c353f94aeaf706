import numpy as np
import pytest

from photovortex.basis import ProblemSpec, setup
from photovortex.solver import solve

_SOLVES = {}


def solved(R, m, P0, alpha=1.0, N=20):
    """Memoized default-config solve; tests must not mutate the result."""
    key = (R, m, P0, alpha, N)
    if key not in _SOLVES:
        _SOLVES[key] = solve(ProblemSpec(R=R, m=m, alpha=alpha, P0=P0, N=N))
    return _SOLVES[key]


@pytest.fixture(scope="session")
def solve_cached():
    return solved


@pytest.fixture(scope="session")
def spec20():
    return ProblemSpec(R=20.0, m=1, alpha=1.0, P0=200.0, N=20)


@pytest.fixture(scope="session")
def basis20(spec20):
    return setup(spec20)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
