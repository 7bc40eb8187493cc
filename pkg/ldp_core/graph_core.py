"""
Graph representation and exact, non-private oracles.

Graphs are immutable NamedTuples holding sorted neighbor tuples, so iteration
order (and therefore every seeded transcript) is deterministic. Induced
subgraphs keep the original vertex ids and record the surviving vertices in
``members``; vertices outside the mask are isolated and ignored by density.
"""

import heapq
import logging
from fractions import Fraction
from typing import Iterable, List, NamedTuple, Optional, Tuple, FrozenSet

import numpy as np

from .config import BRUTE_FORCE_MAX_N, BRUTE_FORCE_CORENESS_MAX_N
from .errors import InvalidInputError, SizeLimitError

logger = logging.getLogger(__name__)


class Graph(NamedTuple):
    n: int
    adjacency: Tuple[Tuple[int, ...], ...]
    # None means every vertex 0..n-1 is present
    members: Optional[FrozenSet[int]] = None


def from_edges(n: int, edges: Iterable[Tuple[int, int]]) -> Graph:
    """
    Build a simple undirected graph on vertices 0..n-1.

    Parameters:
        n (int): vertex count
        edges (iterable): (u, v) pairs; duplicates are merged

    Returns:
        Graph
    """
    if n < 0:
        raise InvalidInputError(f"Vertex count must be nonnegative, got {n}")
    neighbors = [set() for _ in range(n)]
    for u, v in edges:
        u, v = int(u), int(v)
        if not (0 <= u < n and 0 <= v < n):
            raise InvalidInputError(f"Edge ({u}, {v}) has an endpoint outside 0..{n - 1}")
        if u == v:
            raise InvalidInputError(f"Self-loop at vertex {u} is not allowed")
        neighbors[u].add(v)
        neighbors[v].add(u)
    return Graph(n=n, adjacency=tuple(tuple(sorted(s)) for s in neighbors))


def empty_graph(n: int) -> Graph:
    return from_edges(n, [])


def vertices(g: Graph) -> List[int]:
    """Sorted list of the vertices present in g."""
    if g.members is None:
        return list(range(g.n))
    return sorted(g.members)


def _check_vertex(g: Graph, v: int):
    if not (0 <= v < g.n):
        raise InvalidInputError(f"Vertex id {v} out of range for a graph on {g.n} vertices")


def degree(g: Graph, v: int) -> int:
    _check_vertex(g, v)
    return len(g.adjacency[v])


def max_degree(g: Graph) -> int:
    return max((len(nbrs) for nbrs in g.adjacency), default=0)


def edges(g: Graph) -> List[Tuple[int, int]]:
    """Sorted (u, v) pairs with u < v."""
    return [(u, v) for u, nbrs in enumerate(g.adjacency) for v in nbrs if u < v]


def num_edges(g: Graph) -> int:
    return sum(len(nbrs) for nbrs in g.adjacency) // 2


def has_edge(g: Graph, u: int, v: int) -> bool:
    _check_vertex(g, u)
    _check_vertex(g, v)
    return v in g.adjacency[u]


def induced_subgraph(g: Graph, u: Iterable[int]) -> Graph:
    """
    G[U] with original ids kept: edges leaving U are dropped and the
    vertices outside U stay as isolated, non-member ids.
    """
    keep = frozenset(int(x) for x in u)
    for x in keep:
        _check_vertex(g, x)
    if g.members is not None and not keep <= g.members:
        raise InvalidInputError(f"Vertices {sorted(keep - g.members)} are not members of the subgraph")
    adjacency = tuple(
        tuple(w for w in g.adjacency[x] if w in keep) if x in keep else ()
        for x in range(g.n)
    )
    members = None if len(keep) == g.n else keep
    return Graph(n=g.n, adjacency=adjacency, members=members)


def min_induced_degree(g: Graph, u: Iterable[int]) -> int:
    """Minimum degree inside G[U]; 0 for an empty U."""
    keep = set(u)
    if not keep:
        return 0
    return min(sum(1 for w in g.adjacency[x] if w in keep) for x in keep)


def exact_coreness(g: Graph) -> List[int]:
    """
    Matula-Beck peeling: take the current minimum degree d, raise the running
    level to d, and delete vertices of degree at most the level until none are
    left; every vertex deleted at a level gets that level as its coreness.

    Non-member vertices of a masked graph get coreness 0.
    """
    current = [len(nbrs) for nbrs in g.adjacency]
    removed = [False] * g.n
    core = [0] * g.n
    heap = [(current[v], v) for v in vertices(g)]
    heapq.heapify(heap)
    level = 0
    while heap:
        deg, v = heapq.heappop(heap)
        if removed[v] or deg != current[v]:
            continue  # stale entry
        level = max(level, deg)
        core[v] = level
        removed[v] = True
        for w in g.adjacency[v]:
            if not removed[w]:
                current[w] -= 1
                heapq.heappush(heap, (current[w], w))
    return core


def brute_force_coreness(g: Graph) -> List[int]:
    """
    Coreness by definition: max over vertex subsets containing v of the
    minimum induced degree. Exponential; n <= BRUTE_FORCE_CORENESS_MAX_N.
    """
    verts = vertices(g)
    if len(verts) > BRUTE_FORCE_CORENESS_MAX_N:
        raise SizeLimitError(f"brute_force_coreness supports at most {BRUTE_FORCE_CORENESS_MAX_N} vertices, got {len(verts)}")
    core = [0] * g.n
    for mask in range(1, 1 << len(verts)):
        subset = [verts[i] for i in range(len(verts)) if mask >> i & 1]
        low = min_induced_degree(g, subset)
        for v in subset:
            if low > core[v]:
                core[v] = low
    return core


def density(g: Graph) -> Fraction:
    size = g.n if g.members is None else len(g.members)
    if size == 0:
        raise InvalidInputError("Density of a graph with no vertices is undefined")
    return Fraction(num_edges(g), size)


def brute_force_densest(g: Graph) -> Tuple[FrozenSet[int], Fraction]:
    """
    Exhaustive densest subgraph over all nonempty vertex subsets.

    Edge counts for every subset are built with a numpy DP over bitmasks:
    adding the highest vertex v to a subset m adds popcount(adj(v) & m) edges.

    Returns:
        tuple: (subset, rho_star); ties go to the smallest subset size, then to
        the lexicographically smallest sorted vertex list
    """
    verts = vertices(g)
    k = len(verts)
    if k == 0:
        raise InvalidInputError("brute_force_densest needs at least one vertex")
    if k > BRUTE_FORCE_MAX_N:
        raise SizeLimitError(f"brute_force_densest supports at most {BRUTE_FORCE_MAX_N} vertices, got {k}")

    position = {v: i for i, v in enumerate(verts)}
    adj_mask = [0] * k
    for v in verts:
        for w in g.adjacency[v]:
            if w in position:
                adj_mask[position[v]] |= 1 << position[w]

    total = 1 << k
    popcount = np.zeros(total, dtype=np.int64)
    edge_count = np.zeros(total, dtype=np.int64)
    for i in range(k):
        block = 1 << i
        lower = np.arange(block, dtype=np.int64)
        popcount[block:2 * block] = popcount[:block] + 1
        edge_count[block:2 * block] = edge_count[:block] + popcount[lower & adj_mask[i]]

    best_ratio = None
    best_size = best_edges = None
    for size in range(1, k + 1):
        top = int(edge_count[popcount == size].max())
        ratio = Fraction(top, size)
        if best_ratio is None or ratio > best_ratio:
            best_ratio, best_size, best_edges = ratio, size, top

    winners = np.nonzero((popcount == best_size) & (edge_count == best_edges))[0]
    subset = min(tuple(verts[i] for i in range(k) if mask >> i & 1) for mask in winners.tolist())
    logger.debug(f"brute_force_densest: rho*={best_ratio} on {len(subset)} of {k} vertices")
    return frozenset(subset), best_ratio


def max_coreness_core(g: Graph) -> FrozenSet[int]:
    """{v : k(v) = k*} over the vertices present in g."""
    verts = vertices(g)
    if not verts:
        raise InvalidInputError("max_coreness_core needs at least one vertex")
    core = exact_coreness(g)
    k_star = max(core[v] for v in verts)
    return frozenset(v for v in verts if core[v] == k_star)


def parse_edge_list(lines: Iterable[str], source: str = '<input>') -> Graph:
    """
    Parse the edge-list format: "u v" per line, '#' comments, and an optional
    "n <count>" header on the first non-comment line.
    """
    declared_n = None
    pairs = []
    seen_content = False
    for line_no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith('#'):
            continue
        parts = line.split()
        if not seen_content and parts[0] == 'n':
            seen_content = True
            if len(parts) != 2 or not parts[1].isdigit():
                raise InvalidInputError(f"{source}:{line_no}: malformed header {line!r}, expected 'n <count>'")
            declared_n = int(parts[1])
            continue
        seen_content = True
        if len(parts) != 2 or not (parts[0].isdigit() and parts[1].isdigit()):
            raise InvalidInputError(f"{source}:{line_no}: malformed edge {line!r}, expected 'u v'")
        u, v = int(parts[0]), int(parts[1])
        if u == v:
            raise InvalidInputError(f"{source}:{line_no}: self-loop at vertex {u}")
        if declared_n is not None and max(u, v) >= declared_n:
            raise InvalidInputError(f"{source}:{line_no}: vertex {max(u, v)} exceeds declared n={declared_n}")
        pairs.append((u, v))
    if declared_n is None:
        declared_n = 1 + max((max(p) for p in pairs), default=-1)
    return from_edges(declared_n, pairs)


def read_edge_list(path: str) -> Graph:
    with open(path, 'r', encoding='utf-8') as f:
        g = parse_edge_list(f, source=path)
    logger.info(f"Loaded graph from {path}: n={g.n}, m={num_edges(g)}")
    return g


def write_edge_list(g: Graph, path: str):
    with open(path, 'w', encoding='utf-8') as f:
        f.write(f"n {g.n}\n")
        for u, v in edges(g):
            f.write(f"{u} {v}\n")
    logger.info(f"Wrote graph to {path}: n={g.n}, m={num_edges(g)}")
