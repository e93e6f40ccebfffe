import random

import pytest

from mwpmdec.graphs import ORDINARY, VIRTUAL, ModelGraph, Syndrome


def path_graph(weights, virtual_ends=(False, True)):
    """Chain of vertices joined by the given edge weights; either end can be
    virtual."""
    n = len(weights) + 1
    kinds = [ORDINARY] * n
    if virtual_ends[0]:
        kinds[0] = VIRTUAL
    if virtual_ends[1]:
        kinds[-1] = VIRTUAL
    edges = [(i, i + 1, w, 0.0) for i, w in enumerate(weights)]
    return ModelGraph(kinds, edges)


def random_sparse_graph(rng: random.Random, n_ordinary: int, n_virtual: int,
                        extra_edges: int, max_half_weight: int = 6) -> ModelGraph:
    """Connected random graph with even integer weights (possibly zero)."""
    total = n_ordinary + n_virtual
    kinds = [ORDINARY] * n_ordinary + [VIRTUAL] * n_virtual
    edges = []
    for v in range(1, total):
        u = rng.randrange(v)
        edges.append((u, v, 2 * rng.randint(0, max_half_weight), 0.0))
    for _ in range(extra_edges):
        u = rng.randrange(total)
        v = rng.randrange(total)
        if u != v:
            edges.append((u, v, 2 * rng.randint(0, max_half_weight), 0.0))
    return ModelGraph(kinds, edges)


def random_syndrome(rng: random.Random, g: ModelGraph, max_defects: int) -> Syndrome:
    ordinary = [v for v in range(g.num_vertices) if not g.is_virtual[v]]
    k = rng.randint(0, min(len(ordinary), max_defects))
    return Syndrome(tuple(sorted(rng.sample(ordinary, k))))


@pytest.fixture
def rng():
    return random.Random(0xC0FFEE)
