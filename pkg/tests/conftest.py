from pathlib import Path

import pytest

NETLISTS = Path(__file__).resolve().parent.parent / "netlists"


@pytest.fixture(scope="session")
def netlists_dir() -> Path:
    return NETLISTS
