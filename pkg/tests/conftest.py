from pathlib import Path

import pytest

from verbspace import taxonomy as tx

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def verbs_path():
    return DATA / "verbs.json"


@pytest.fixture(scope="session")
def verbs(verbs_path):
    return tx.load_taxonomy(verbs_path)


# one line per acceptance criterion, printed after the run
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: (int(s.split()[1].rstrip(":").rstrip("ab")), s)):
            terminalreporter.write_line(line)
