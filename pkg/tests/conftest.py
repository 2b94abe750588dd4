import pytest

from talbotflow.model import reference_setup

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def setup50():
    return reference_setup()


@pytest.fixture(scope="session")
def small_setups():
    return {n: reference_setup(n) for n in (1, 2, 3, 5)}


@pytest.fixture
def verdict():
    """Record one acceptance line; the terminal summary lists them all."""

    def record(number: int, ok: bool, detail: str):
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        ACCEPTANCE_LINES.append(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
