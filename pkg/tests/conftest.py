from __future__ import annotations

import pytest

from condstore import open_store


@pytest.fixture
def mem():
    store = open_store(backend="memory")
    yield store
    store.close()


@pytest.fixture
def froot(tmp_path):
    return str(tmp_path / "db")


@pytest.fixture
def fstore(froot):
    store = open_store(froot, create=True, sync=False)
    yield store
    store.close()
