"""Shared fixtures: small hand graphs and a random-graph maker."""

import numpy as np
import pytest

from chronopath.graph import HeterogeneousGraph, ingest_edges

TINY_ROWS = [
    ("A", "C", "call", 1, 5),
    ("C", "B", "trans", 2, 3),
    ("A", "C", "call", 4, 5),
]
TINY_TYPES = {"A": "EOA", "B": "EOA", "C": "CA"}


@pytest.fixture
def tiny_graph() -> HeterogeneousGraph:
    return ingest_edges(TINY_ROWS, types=TINY_TYPES)


def random_graph(seed: int, max_edges: int = 60) -> HeterogeneousGraph:
    """Small random temporal multigraph with both node types, plenty of
    duplicate timestamps, self-calls and type-violating junk edges."""
    rng = np.random.default_rng(seed)
    n_eoa = int(rng.integers(2, 8))
    n_ca = int(rng.integers(1, 5))
    eoas = [f"e{i}" for i in range(n_eoa)]
    cas = [f"c{i}" for i in range(n_ca)]
    nodes = eoas + cas

    def pick(pool):
        return pool[int(rng.integers(len(pool)))]

    rows = []
    for _ in range(int(rng.integers(4, max_edges + 1))):
        if rng.random() < 0.55:
            kind = "call"
            src = pick(eoas) if rng.random() < 0.6 else pick(nodes)
            dst = pick(cas) if rng.random() < 0.9 else pick(nodes)
        else:
            kind = "trans"
            src = pick(cas) if rng.random() < 0.75 else pick(nodes)
            dst = pick(eoas) if rng.random() < 0.8 else pick(nodes)
        rows.append((src, dst, kind, int(rng.integers(0, 9)),
                     float(rng.integers(0, 5))))
    types = {a: "EOA" for a in eoas}
    types.update({c: "CA" for c in cas})
    return ingest_edges(rows, types=types)
