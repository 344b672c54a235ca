import math
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

K_PERP = 2 * math.sqrt(2) * math.pi

_criteria: list[str] = []


def record_criterion(line: str) -> None:
    print(line)
    _criteria.append(line)


@pytest.fixture
def k_perp():
    return K_PERP


def pytest_terminal_summary(terminalreporter):
    if _criteria:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_criteria, key=lambda s: int(s.split()[1].rstrip(":").split(".")[0])):
            terminalreporter.write_line(line)
