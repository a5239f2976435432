from pathlib import Path

import pytest

from fairforest import builtin_schema, load_csv

DATA_DIR = Path(__file__).resolve().parent.parent / "data"
ADULT_CSV = DATA_DIR / "adult.csv"


@pytest.fixture(scope="session")
def adult_data():
    if not ADULT_CSV.exists():
        pytest.skip(f"census dataset not present at {ADULT_CSV}")
    return load_csv(ADULT_CSV, builtin_schema("adult"))
