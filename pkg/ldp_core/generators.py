"""
Seeded graph families for tests and experiments.

Every generator is a pure function of its parameters and seed. Query graphs use
the fixed layout x = 0, A = 1..n, B = n+1..2n.
"""

import logging
from collections import defaultdict
from typing import NamedTuple, Sequence, Tuple

import networkx as nx
import numpy as np

from .config import REGULAR_MAX_RETRIES
from .errors import InvalidInputError
from .graph_core import Graph, from_edges, has_edge, edges

logger = logging.getLogger(__name__)

FAMILIES = ('gnp', 'regular', 'path', 'query-graph')


class QueryGraphSpec(NamedTuple):
    n: int
    X: Tuple[int, ...]
    Q: Tuple[int, ...]

    @property
    def x_vertex(self) -> int:
        return 0

    @property
    def a_vertices(self) -> Tuple[int, ...]:
        return tuple(range(1, self.n + 1))

    @property
    def b_vertices(self) -> Tuple[int, ...]:
        return tuple(range(self.n + 1, 2 * self.n + 1))


def make_query_spec(X: Sequence[int], Q: Sequence[int]) -> QueryGraphSpec:
    """Build a QueryGraphSpec from bit sequences or '0101' strings."""
    X = tuple(int(c) for c in X)
    Q = tuple(int(c) for c in Q)
    if len(X) != len(Q):
        raise InvalidInputError(f"X and Q must have equal length, got {len(X)} and {len(Q)}")
    if any(b not in (0, 1) for b in X + Q):
        raise InvalidInputError("X and Q must be 0/1 vectors")
    return QueryGraphSpec(n=len(X), X=X, Q=Q)


def inner_product(spec: QueryGraphSpec) -> int:
    return sum(x * q for x, q in zip(spec.X, spec.Q))


def _from_networkx(n: int, G: nx.Graph) -> Graph:
    return from_edges(n, ((int(u), int(v)) for u, v in G.edges()))


def gen_gnp(n: int, p: float, seed: int) -> Graph:
    """Erdos-Renyi G(n, p); the skipping sampler keeps sparse sweeps linear in n + m."""
    if not 0.0 <= p <= 1.0:
        raise InvalidInputError(f"Edge probability must lie in [0, 1], got {p}")
    if n < 0:
        raise InvalidInputError(f"Vertex count must be nonnegative, got {n}")
    return _from_networkx(n, nx.fast_gnp_random_graph(n, p, seed=seed))


def gen_regular(n: int, d: int, seed: int) -> Graph:
    """Random simple d-regular graph from the networkx pairing sampler."""
    if (n * d) % 2 != 0:
        raise InvalidInputError(f"n * d must be even, got n={n}, d={d}")
    if not 0 <= d < n:
        raise InvalidInputError(f"Need 0 <= d < n, got n={n}, d={d}")
    seeds = np.random.SeedSequence(seed)
    for attempt in range(REGULAR_MAX_RETRIES):
        attempt_seed = int(seeds.spawn(1)[0].generate_state(1)[0]) if attempt else seed
        try:
            G = nx.random_regular_graph(d, n, seed=attempt_seed)
        except nx.NetworkXError as e:
            raise InvalidInputError(f"No simple {d}-regular graph on {n} vertices: {e}") from e
        if nx.number_of_selfloops(G) == 0 and all(deg == d for _, deg in G.degree()):
            logger.debug(f"gen_regular(n={n}, d={d}, seed={seed}): {G.number_of_edges()} edges "
                         f"after {attempt + 1} attempt(s)")
            return _from_networkx(n, G)
    raise InvalidInputError(f"No simple {d}-regular graph on {n} vertices after {REGULAR_MAX_RETRIES} attempts")


def gen_path(n: int) -> Graph:
    if n < 1:
        raise InvalidInputError(f"Path needs at least one vertex, got {n}")
    return from_edges(n, ((i, i + 1) for i in range(n - 1)))


def gen_query_graph(spec: QueryGraphSpec) -> Graph:
    """
    G_X(Q) on 2n+1 vertices: X_i joins a_i to x, Q_i joins a_i to all of B,
    B is a clique and x never touches B.
    """
    if len(spec.X) != spec.n or len(spec.Q) != spec.n:
        raise InvalidInputError(f"|X| and |Q| must equal n={spec.n}, got {len(spec.X)} and {len(spec.Q)}")
    x = spec.x_vertex
    a = spec.a_vertices
    b = spec.b_vertices
    pairs = []
    for i in range(spec.n):
        if spec.X[i]:
            pairs.append((x, a[i]))
        if spec.Q[i]:
            pairs.extend((a[i], bj) for bj in b)
    pairs.extend((b[i], b[j]) for i in range(spec.n) for j in range(i + 1, spec.n))
    return from_edges(2 * spec.n + 1, pairs)


def random_query_spec(n: int, seed: int) -> QueryGraphSpec:
    rng = np.random.default_rng(seed)
    bits = rng.integers(0, 2, size=(2, n))
    return QueryGraphSpec(n=n, X=tuple(bits[0].tolist()), Q=tuple(bits[1].tolist()))


def neighboring_pair(g: Graph, u: int, v: int) -> Tuple[Graph, Graph]:
    """(g, g') where g' toggles the edge {u, v}."""
    if u == v:
        raise InvalidInputError(f"Neighboring pair needs two distinct endpoints, got {u} twice")
    present = has_edge(g, u, v)
    pair = (min(u, v), max(u, v))
    current = edges(g)
    if present:
        toggled = [e for e in current if e != pair]
    else:
        toggled = current + [pair]
    return g, from_edges(g.n, toggled)


def generate(family: str, n: int, seed: int, p: float = 0.1, d: int = 3, X: str = '', Q: str = '') -> Graph:
    """Dispatch by CLI family name."""
    if family == 'gnp':
        return gen_gnp(n, p, seed)
    if family == 'regular':
        return gen_regular(n, d, seed)
    if family == 'path':
        return gen_path(n)
    if family == 'query-graph':
        if X or Q:
            return gen_query_graph(make_query_spec(X, Q))
        return gen_query_graph(random_query_spec(n, seed))
    raise InvalidInputError(f"Unknown graph family {family!r}; choose from {', '.join(FAMILIES)}")


def neighborhood_signatures(spec_x: Sequence[int], n: int) -> dict:
    """
    Neighborhoods of x and of every a_i across all 2^n query vectors for a
    fixed X (n <= 12). Maps vertex -> set of neighbor tuples seen.
    """
    if n > 12:
        raise InvalidInputError(f"neighborhood_signatures enumerates 2^n queries; n={n} is too large")
    seen = defaultdict(set)
    for mask in range(1 << n):
        q = tuple(mask >> i & 1 for i in range(n))
        g = gen_query_graph(QueryGraphSpec(n=n, X=tuple(spec_x), Q=q))
        for v in range(n + 1):
            seen[v].add(g.adjacency[v])
    return dict(seen)
