import os

import numpy as np
import pytest
from hypothesis import settings

from gausscut.graph import SignedGraph, WeightedGraph

settings.register_profile("ci", max_examples=60, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))


def random_graph(n, p, seed, weights="unit"):
    rng = np.random.default_rng(seed)
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < p:
                w = 1.0 if weights == "unit" else float(rng.uniform(0.5, 2.0))
                edges.append((i, j, w))
    return WeightedGraph.from_edges(n, edges)


def random_signed(n, p, seed):
    rng = np.random.default_rng(seed)
    plus, minus = [], []
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < p:
                w = float(rng.uniform(0.2, 2.0))
                (plus if rng.random() < 0.5 else minus).append((i, j, w))
    return SignedGraph.from_edges(n, plus, minus)


@pytest.fixture
def triangle():
    return WeightedGraph.from_edges(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)])


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for num in sorted(lines):
            terminalreporter.write_line(lines[num])
