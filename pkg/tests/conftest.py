from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from advis.graph import build_knn, build_operator


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_operator(rng):
    """Connected random-geometry operator on 30 points (untruncated)."""
    X = rng.random((30, 3))
    graph = build_knn(X, 5)
    return build_operator(graph)


def random_connected_operator(rng, n, dim=3, k=None):
    """Sample random points until the mutual-or kNN graph is connected."""
    from advis.graph import DisconnectedGraphError

    k = k or max(3, n // 10)
    for _ in range(50):
        X = rng.random((n, dim))
        graph = build_knn(X, k)
        try:
            return X, graph, build_operator(graph)
        except DisconnectedGraphError:
            continue
    raise RuntimeError("could not sample a connected graph")
