import pytest

from gridseer import fixture_path, parse_case

ACCEPTANCE: list[str] = []


def load(name):
    return parse_case(fixture_path(name))


@pytest.fixture(scope="session")
def ieee14():
    return load("ieee14.json")


@pytest.fixture(scope="session")
def corner():
    return load("corner.json")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
