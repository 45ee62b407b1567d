"""Pytest fixtures for modcsp tests."""

import pytest

from modcsp import fixtures
from modcsp.core import make_relation, make_structure
from modcsp.parser import dump_json


def pytest_addoption(parser):
    """Add command line option for slow tests."""
    parser.addoption(
        "--run-slow",
        action="store_true",
        default=False,
        help="Run slow tests (larger exhaustive families)",
    )


def pytest_configure(config):
    """Register custom markers."""
    config.addinivalue_line("markers", "slow: mark test as slow (needs --run-slow)")


def pytest_collection_modifyitems(config, items):
    """Skip slow tests unless --run-slow is specified."""
    if config.getoption("--run-slow"):
        return
    skip_slow = pytest.mark.skip(reason="need --run-slow option to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def triangle():
    """Directed 3-cycle on {0, 1, 2}."""
    return make_structure(
        {"V": [0, 1, 2]}, [make_relation("E", ("V", "V"), [(0, 1), (1, 2), (2, 0)])]
    )


@pytest.fixture
def edge():
    """Single symmetric edge {0, 1}."""
    return make_structure({"V": [0, 1]}, [make_relation("E", ("V", "V"), [(0, 1), (1, 0)])])


@pytest.fixture
def z2_affine():
    return fixtures.z2_affine()


@pytest.fixture
def tp2():
    return fixtures.tp_structure(2)


@pytest.fixture
def write_json(tmp_path):
    """Write a document to a JSON file under tmp_path and return its path."""

    def _write(name, document):
        path = tmp_path / name
        path.write_text(dump_json(document), encoding="utf-8")
        return str(path)

    return _write
