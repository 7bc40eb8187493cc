import numpy as np
import pytest

from ldp_core.generators import gen_gnp
from ldp_core.graph_core import from_edges


@pytest.fixture(autouse=True)
def _no_log_file(monkeypatch):
    monkeypatch.setenv("LDP_CORE_LOG_FILE", "")


def clique_edges(vertices):
    vs = list(vertices)
    return [(vs[i], vs[j]) for i in range(len(vs)) for j in range(i + 1, len(vs))]


def connected_gnp(n, p, seed):
    """G(n, p) plus a random spanning tree, so the result is connected."""
    g = gen_gnp(n, p, seed)
    rng = np.random.default_rng(seed + 1)
    order = rng.permutation(n).tolist()
    tree = [(order[i], order[int(rng.integers(0, i))]) for i in range(1, n)]
    extra = [(u, v) for u, nbrs in enumerate(g.adjacency) for v in nbrs if u < v]
    return from_edges(n, extra + tree)


@pytest.fixture
def k4():
    return from_edges(4, clique_edges(range(4)))


@pytest.fixture
def k4_pendant():
    return from_edges(5, clique_edges(range(4)) + [(0, 4)])


@pytest.fixture
def path4():
    return from_edges(4, [(0, 1), (1, 2), (2, 3)])


@pytest.fixture
def two_cliques():
    """K5 on 0..4 and K3 on 5..7."""
    return from_edges(8, clique_edges(range(5)) + clique_edges(range(5, 8)))


@pytest.fixture
def write_graph(tmp_path):
    def _write(g, name='graph.txt'):
        path = tmp_path / name
        lines = [f"n {g.n}"] + [f"{u} {v}" for u, nbrs in enumerate(g.adjacency) for v in nbrs if u < v]
        path.write_text('\n'.join(lines) + '\n')
        return str(path)
    return _write
