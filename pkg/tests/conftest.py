import os
from fractions import Fraction

import pytest
from hypothesis import HealthCheck, settings

from specjac.bernstein import decay_params, make_phi
from specjac.model import power_model, zero_model

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=400, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# filled by test_acceptance, printed after the run
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def delta1():
    return power_model(1, Fraction(9, 2))


@pytest.fixture(scope="session")
def phi_delta1(delta1):
    return make_phi(delta1)


@pytest.fixture(scope="session")
def params_delta1(phi_delta1):
    return decay_params(phi_delta1, Fraction(7, 2))


@pytest.fixture(scope="session")
def zero_small():
    return zero_model(3, Fraction(1, 2))


@pytest.fixture(scope="session")
def zero_large():
    return zero_model(3, Fraction(3, 2))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
