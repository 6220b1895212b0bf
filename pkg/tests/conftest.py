from __future__ import annotations

from pathlib import Path

import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=200)
settings.load_profile("default")

DATA = Path(__file__).resolve().parents[1] / "src" / "phonemt" / "data"


@pytest.fixture
def data_dir() -> Path:
    return DATA


@pytest.fixture
def en_lexicon_path() -> Path:
    return DATA / "lexicons" / "en.tsv"


@pytest.fixture
def de_lexicon_path() -> Path:
    return DATA / "lexicons" / "de.tsv"


# One line per acceptance criterion, printed after the run.
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number])
