import sys
from pathlib import Path

import pytest

TESTS = Path(__file__).resolve().parent
sys.path.insert(0, str(TESTS))

from pasmotive.measure import DefinableSet  # noqa: E402

DATA = Path(__file__).resolve().parents[1] / "src" / "pasmotive" / "data"


def load_set(relative: str) -> DefinableSet:
    path = DATA / relative
    return DefinableSet.from_text(path.read_text(), path.stem)


@pytest.fixture
def data_dir() -> Path:
    return DATA
