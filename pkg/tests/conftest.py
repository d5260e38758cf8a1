import numpy as np
import pytest

from epsstokes.mesh import build_structured
from epsstokes.systems import ProblemData, normal_flux


def benchmark_data(**kw) -> ProblemData:
    """Quadratic velocity trace with a linear pressure that solves the PP problem exactly."""
    return ProblemData(
        u_b=lambda x, y: (x * (x - 1), y * (y - 1)),
        g_b=normal_flux(lambda x, y: 2.0 + 0 * x, lambda x, y: 2.0 + 0 * y),
        **kw,
    )


def divfree_data(**kw) -> ProblemData:
    return ProblemData(u_b=lambda x, y: (y, x), **kw)


def u_bench(x, y):
    return (x * (x - 1), y * (y - 1))


def grad_u_bench(x, y):
    z = 0 * x
    return ((2 * x - 1, z), (z, 2 * y - 1))


def p_bench(x, y):
    return 2 * x + 2 * y - 2


def grad_p_bench(x, y):
    return (2 + 0 * x, 2 + 0 * y)


@pytest.fixture(scope="session")
def mesh32():
    return build_structured(32, 32)


@pytest.fixture(scope="session")
def mesh8():
    return build_structured(8, 8)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
