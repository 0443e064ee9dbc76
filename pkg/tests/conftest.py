import pytest

from edgnn.data import load_node_dataset, load_tu_dataset, resolve_dataset


@pytest.fixture(scope="session")
def mutag():
    return load_tu_dataset(resolve_dataset("mutag", "graph"))


@pytest.fixture(scope="session")
def mutag_node():
    return load_node_dataset(resolve_dataset("mutag", "node"))
