import pytest

from metonymy.data import Dataset, load_dataset

from support import FIXTURES


@pytest.fixture
def sample12() -> Dataset:
    return load_dataset(FIXTURES / "sample12.jsonl", strict=True)
