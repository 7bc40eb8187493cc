from fractions import Fraction

import networkx as nx
import pytest

from ldp_core.errors import InvalidInputError, SizeLimitError
from ldp_core.generators import gen_gnp, gen_query_graph, make_query_spec
from ldp_core.graph_core import (
    brute_force_coreness,
    brute_force_densest,
    degree,
    density,
    edges,
    empty_graph,
    exact_coreness,
    from_edges,
    induced_subgraph,
    max_coreness_core,
    min_induced_degree,
    num_edges,
    parse_edge_list,
    read_edge_list,
    vertices,
    write_edge_list,
)

from .conftest import clique_edges


def test_degree_examples(k4):
    assert all(degree(k4, v) == 3 for v in range(4))
    assert degree(empty_graph(5), 0) == 0
    assert degree(from_edges(3, [(0, 1), (1, 2)]), 1) == 2


def test_degree_rejects_out_of_range_vertex(k4):
    with pytest.raises(InvalidInputError):
        degree(k4, 4)


def test_from_edges_rejects_self_loops_and_bad_ids():
    with pytest.raises(InvalidInputError):
        from_edges(3, [(1, 1)])
    with pytest.raises(InvalidInputError):
        from_edges(3, [(0, 3)])


def test_from_edges_merges_duplicates():
    g = from_edges(3, [(0, 1), (1, 0), (0, 1)])
    assert edges(g) == [(0, 1)]


def test_induced_subgraph_of_k4_is_triangle(k4):
    sub = induced_subgraph(k4, {0, 1, 2})
    assert num_edges(sub) == 3
    assert vertices(sub) == [0, 1, 2]
    assert sub.adjacency[3] == ()
    assert density(sub) == 1


def test_induced_subgraph_on_all_vertices_is_identity(k4_pendant):
    assert induced_subgraph(k4_pendant, range(5)) == k4_pendant


def test_induced_subgraph_of_star_leaves_is_edgeless():
    star = from_edges(4, [(0, 1), (0, 2), (0, 3)])
    sub = induced_subgraph(star, {1, 2, 3})
    assert num_edges(sub) == 0
    assert density(sub) == 0


def test_induced_subgraph_rejects_invalid_ids(k4):
    with pytest.raises(InvalidInputError):
        induced_subgraph(k4, {0, 7})


def test_exact_coreness_examples(k4, path4):
    assert exact_coreness(k4) == [3, 3, 3, 3]
    assert exact_coreness(path4) == [1, 1, 1, 1]
    g = gen_query_graph(make_query_spec('11', '10'))
    assert exact_coreness(g)[0] == 1


def test_density_examples(k4):
    assert density(k4) == Fraction(3, 2)
    assert density(empty_graph(1)) == 0
    cycle = from_edges(5, [(i, (i + 1) % 5) for i in range(5)])
    assert density(cycle) == 1
    with pytest.raises(InvalidInputError):
        density(empty_graph(0))


def test_brute_force_densest_examples(k4_pendant):
    assert brute_force_densest(k4_pendant) == (frozenset(range(4)), Fraction(3, 2))
    triangle = from_edges(3, clique_edges(range(3)))
    assert brute_force_densest(triangle) == (frozenset(range(3)), Fraction(1))
    assert brute_force_densest(empty_graph(4)) == (frozenset({0}), Fraction(0))


def test_brute_force_densest_size_limit():
    with pytest.raises(SizeLimitError):
        brute_force_densest(empty_graph(21))


def test_max_coreness_core_examples(k4_pendant):
    assert max_coreness_core(k4_pendant) == frozenset(range(4))
    cycle = from_edges(6, [(i, (i + 1) % 6) for i in range(6)])
    assert max_coreness_core(cycle) == frozenset(range(6))
    triangles = from_edges(6, clique_edges(range(3)) + clique_edges(range(3, 6)))
    assert max_coreness_core(triangles) == frozenset(range(6))


@pytest.mark.parametrize('seed', range(40))
def test_exact_coreness_agrees_with_brute_force(seed):
    n = 3 + seed % 6
    g = gen_gnp(n, 0.2 + 0.1 * (seed % 6), seed)
    core = exact_coreness(g)
    assert core == brute_force_coreness(g)
    for v in range(n):
        assert core[v] <= degree(g, v)
        upper = [u for u in range(n) if core[u] >= core[v]]
        assert min_induced_degree(g, upper) >= core[v]


@pytest.mark.parametrize('seed', range(10))
def test_exact_coreness_matches_networkx(seed):
    g = gen_gnp(300, 0.03, seed)
    nxg = nx.Graph()
    nxg.add_nodes_from(range(g.n))
    nxg.add_edges_from(edges(g))
    expected = nx.core_number(nxg)
    assert exact_coreness(g) == [expected[v] for v in range(g.n)]


@pytest.mark.parametrize('seed', range(30))
def test_densest_bounded_by_max_coreness(seed):
    n = 4 + seed % 9
    g = gen_gnp(n, 0.4, 100 + seed)
    core = exact_coreness(g)
    k_star = max(core)
    _, rho_star = brute_force_densest(g)
    assert rho_star <= k_star
    assert density(induced_subgraph(g, max_coreness_core(g))) >= Fraction(k_star, 2)


def test_min_induced_degree_of_empty_set_is_zero(k4):
    assert min_induced_degree(k4, []) == 0


def test_parse_edge_list_with_header_and_comments():
    g = parse_edge_list(['# a comment', 'n 6', '0 1', '', '1 2', '2 1'])
    assert g.n == 6
    assert edges(g) == [(0, 1), (1, 2)]


def test_parse_edge_list_infers_n():
    assert parse_edge_list(['0 1', '3 4']).n == 5
    assert parse_edge_list([]).n == 0


@pytest.mark.parametrize('lines, line_no', [
    (['0 1', '2 2'], 2),
    (['0 1', 'n 4'], 2),
    (['n 3', '0 1', '1 5'], 3),
    (['0 x'], 1),
])
def test_parse_edge_list_errors_carry_line_number(lines, line_no):
    with pytest.raises(InvalidInputError, match=f":{line_no}:"):
        parse_edge_list(lines)


def test_write_then_read_edge_list(tmp_path, k4_pendant):
    path = tmp_path / 'g.txt'
    write_edge_list(from_edges(7, edges(k4_pendant)), str(path))
    g = read_edge_list(str(path))
    assert g.n == 7
    assert edges(g) == edges(k4_pendant)
