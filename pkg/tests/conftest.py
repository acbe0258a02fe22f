import sys
from pathlib import Path

import pytest

# Make the sibling fixture helper importable regardless of rootdir layout.
sys.path.insert(0, str(Path(__file__).parent))

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA


@pytest.fixture(scope="session")
def seed_lexicon():
    from motiontax.taxonomy import load_lexicon

    return load_lexicon()
