"""
Shared fixtures: the shipped instance files and helpers to reach them
"""
from pathlib import Path

import pytest

from app.services.corpus import DATA_DIR, load_fixture
from app.services.graph import FchcInstance


@pytest.fixture
def fixture_path():
    def path(name: str) -> Path:
        return DATA_DIR / f"{name}.g"
    return path


@pytest.fixture
def k4() -> FchcInstance:
    return load_fixture("k4")


@pytest.fixture
def k33() -> FchcInstance:
    return load_fixture("k33")


@pytest.fixture
def prism() -> FchcInstance:
    return load_fixture("prism")


@pytest.fixture
def q3() -> FchcInstance:
    return load_fixture("q3")


@pytest.fixture
def petersen() -> FchcInstance:
    return load_fixture("petersen")
