import random
from pathlib import Path

import pytest

from modgap.graph import Graph, load_edge_list

DATA = Path(__file__).parent / "data"


def two_triangles() -> Graph:
    return Graph(6, ((0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)))


def cycle4() -> Graph:
    return Graph(4, ((0, 1), (1, 2), (2, 3), (0, 3)))


def triangle() -> Graph:
    return Graph(3, ((0, 1), (1, 2), (0, 2)))


def karate() -> Graph:
    return load_edge_list((DATA / "karate.txt").read_text())


def random_graph(seed: int, n: int | None = None, p: float | None = None) -> Graph:
    """Seeded G(n, p) graph with at least one edge."""
    rng = random.Random(seed)
    n = n if n is not None else rng.randint(4, 8)
    p = p if p is not None else rng.choice((0.2, 0.5, 0.8))
    while True:
        edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
        if edges:
            return Graph(n, tuple(edges))


def random_suite(count: int = 200) -> list[Graph]:
    graphs = []
    densities = (0.2, 0.5, 0.8)
    for s in range(count):
        rng = random.Random(10_000 + s)
        graphs.append(random_graph(s, rng.randint(4, 8), densities[s % 3]))
    return graphs


@pytest.fixture
def tt():
    return two_triangles()


@pytest.fixture
def c4():
    return cycle4()


@pytest.fixture
def k3():
    return triangle()


@pytest.fixture(scope="session")
def karate_graph():
    return karate()
