import numpy as np
import pytest
from hypothesis import settings

from morreykit.nfunction import Domain, DoublePhase, LogType, VariableExponent

settings.register_profile("default", deadline=None, max_examples=60, derandomize=True)
settings.load_profile("default")


@pytest.fixture(scope="session")
def square():
    return Domain.unit_cube(2)


@pytest.fixture(scope="session")
def centre():
    return np.array([0.5, 0.5])


def builtin_families(domain):
    """One admissible model per builtin family on ``domain`` (n = 2)."""
    return {
        "variable-exponent": VariableExponent(domain, "4 + 0.5*sin(x1)"),
        "log-type": LogType(domain, "3 + 0.5*cos(x2)"),
        "double-phase": DoublePhase(domain, "1 + x1^2", 3, 4),
    }


@pytest.fixture(scope="session")
def families(square):
    return builtin_families(square)


# one line per acceptance criterion, collected by tests/test_acceptance.py
ACCEPTANCE_LINES = []


def record_acceptance(number, title, ok, detail):
    line = f"criterion {number} {'PASS' if ok else 'FAIL'}: {title} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
