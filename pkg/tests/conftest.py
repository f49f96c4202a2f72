import pytest

from dsdsense.sweeps import line_cut, sweep_2d

TAUS = (1, 2, 5, 10)
_acceptance_lines = []


@pytest.fixture(scope="session")
def cuts():
    """201-sample DSD cuts over [-5, 5] for both axes and all four durations."""
    return {
        (axis, tau): line_cut("dsd", tau, axis, (-5.0, 5.0), 201)
        for axis in ("degenerate", "nondegenerate")
        for tau in TAUS
    }


@pytest.fixture(scope="session")
def maps():
    """41x41 DSD population maps over [-5, 5]^2."""
    return {tau: sweep_2d("dsd", tau, (-5.0, 5.0, 41), parallel=4) for tau in TAUS}


@pytest.fixture
def acceptance_log():
    def log(number, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {detail}"
        _acceptance_lines.append(line)
        print(line)

    return log


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
