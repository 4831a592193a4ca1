import sys
from pathlib import Path

import pytest
from flint import acb, arb

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from blockzeta.numeric import PrecisionContext  # noqa: E402


def as_complex(x) -> complex:
    """Backend scalar (complex or acb) to a Python complex."""
    if isinstance(x, acb):
        return complex(float(x.real.mid()), float(x.imag.mid()))
    if isinstance(x, arb):
        return complex(float(x.mid()))
    return complex(x)


@pytest.fixture
def dbl():
    return PrecisionContext()


@pytest.fixture
def mp128():
    return PrecisionContext(128)


# one PASS/FAIL line per acceptance criterion, shown in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
