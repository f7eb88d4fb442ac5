import pytest

from drheat.geometry import SpaceParams
from drheat.heat import get_kernel


@pytest.fixture(scope="session")
def h3():
    return SpaceParams(2, 0)


@pytest.fixture(scope="session")
def heis():
    return SpaceParams(2, 1)


@pytest.fixture(scope="session")
def h3_kernel(h3):
    return get_kernel(h3)


@pytest.fixture(scope="session")
def heis_kernel(heis):
    return get_kernel(heis)


_VERDICTS: list[str] = []


@pytest.fixture
def verdict():
    """Print and record one PASS/FAIL line for an acceptance criterion."""

    def report(label: str, ok: bool, detail: str = "") -> bool:
        line = f"{label}: {'PASS' if ok else 'FAIL'}" + (f"  ({detail})" if detail else "")
        print(line)
        _VERDICTS.append(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
