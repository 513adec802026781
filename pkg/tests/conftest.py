import numpy as np
import pytest

from nfcocomo import default_rules, load_table

ACCEPTANCE_RESULTS: dict[str, str] = {}


@pytest.fixture(autouse=True)
def _no_table_env(monkeypatch):
    monkeypatch.delenv("NFCOCOMO_TABLE", raising=False)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def cocomo2():
    return load_table("cocomo-ii", rules=default_rules())


@pytest.fixture(scope="session")
def cocomo81():
    return load_table("cocomo-81", rules=default_rules())


@pytest.fixture(scope="session")
def cocomo81_plain():
    return load_table("cocomo-81", rules=())


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS, key=lambda k: int(k.split()[0][1:])):
        terminalreporter.write_line(f"{key}: {ACCEPTANCE_RESULTS[key]}")
