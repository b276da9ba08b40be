import pytest

from bols_edgeworth.cli import bundled_config
from bols_edgeworth.design import DesignConfig


@pytest.fixture(scope="session")
def gamma_cfg():
    return DesignConfig.from_dict(bundled_config("table1_gamma"))


@pytest.fixture(scope="session")
def normal_cfg():
    return DesignConfig.from_dict(bundled_config("table2_normal"))


@pytest.fixture(scope="session")
def mixture_cfg():
    return DesignConfig.from_dict(bundled_config("table3_mixture"))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
