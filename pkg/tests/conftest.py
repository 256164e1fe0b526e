import pytest

from varreins.market import BASE_BENCHMARK, BASE_MARKET, BASE_PRODUCT
from varreins.strategy import OptimalStrategy, constant_mix, solve_dn

# lines collected by the acceptance module, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def market():
    return BASE_MARKET


@pytest.fixture(scope="session")
def product():
    return BASE_PRODUCT


@pytest.fixture(scope="session")
def bench():
    return BASE_BENCHMARK


@pytest.fixture(scope="session")
def strat(market, product, bench):
    return OptimalStrategy.solve(market, product, bench)


@pytest.fixture(scope="session")
def sol(strat):
    return strat.solution


@pytest.fixture(scope="session")
def dn(market, product):
    return solve_dn(market, product)


@pytest.fixture(scope="session")
def cn(market, product):
    return constant_mix(market, product)
