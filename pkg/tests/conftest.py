import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fuzzystab.algebra import make_matrix_algebra, make_poly_trunc_algebra, make_real_algebra

settings.register_profile(
    "repo", max_examples=60, deadline=None, derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")


@pytest.fixture
def real():
    return make_real_algebra()


@pytest.fixture
def m2():
    return make_matrix_algebra(2)


@pytest.fixture
def m2_op():
    return make_matrix_algebra(2, "operator")


@pytest.fixture
def poly2():
    return make_poly_trunc_algebra(2)


@pytest.fixture
def poly2_op():
    return make_poly_trunc_algebra(2, "operator")


def unit(alg, i):
    v = np.zeros(alg.dim)
    v[i] = 1.0
    return alg.element(v)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
