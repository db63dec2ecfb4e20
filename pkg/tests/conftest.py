from pathlib import Path

import pytest

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture
def table1_glossary_path() -> Path:
    return DATA_DIR / "glossary_table1.jsonl"


@pytest.fixture
def lecture_path() -> Path:
    return DATA_DIR / "lecture.tsv"


@pytest.fixture
def background_path() -> Path:
    return DATA_DIR / "background.tsv"
