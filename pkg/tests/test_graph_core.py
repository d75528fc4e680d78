import math
from itertools import combinations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from treeramsey.bits import bits, mask_of, popcount
from treeramsey.errors import CapExceeded
from treeramsey.graph_core import ColouredGraph, GnpSpec, Graph, check_uniformity, codegree_stats, sample_gnp

from oracles import adjacency_sets
from strategies import graphs


def test_gnp_is_deterministic_and_simple():
    a = sample_gnp(GnpSpec(60, 0.3, 7))
    b = sample_gnp(GnpSpec(60, 0.3, 7))
    assert a == b and a.to_text() == b.to_text()
    assert a != sample_gnp(GnpSpec(60, 0.3, 8))
    Graph(a.n, a.adj, check=True)  # symmetric, loop-free


def test_gnp_extremes():
    assert sample_gnp(GnpSpec(12, 0, 1)).edge_count() == 0
    assert sample_gnp(GnpSpec(12, 1, 1)).edge_count() == 66


def test_gnp_density_within_four_sigma():
    n, p = 200, 0.3
    pairs = n * (n - 1) // 2
    e = sample_gnp(GnpSpec(n, p, 3)).edge_count()
    assert abs(e - p * pairs) < 4 * math.sqrt(pairs * p * (1 - p))


def test_gnp_smaller_graph_is_an_induced_prefix():
    # counter-based sampling: each pair's coin depends only on (seed, u, v)
    big, small = sample_gnp(GnpSpec(40, 0.5, 11)), sample_gnp(GnpSpec(25, 0.5, 11))
    assert big.restrict((1 << 25) - 1).edges() == small.edges()


def test_vertex_cap():
    with pytest.raises(CapExceeded):
        sample_gnp(GnpSpec(10, 0.5, 0), cap=5)


def test_rejects_malformed_adjacency():
    with pytest.raises(ValueError):
        Graph(2, [0b10, 0])
    with pytest.raises(ValueError):
        Graph(1, [0b1])
    with pytest.raises(ValueError):
        Graph.from_edges(3, [(0, 3)])


@given(graphs())
def test_text_roundtrip(G):
    assert Graph.from_text(G.to_text()) == G
    assert Graph.from_text("# echoed header\n" + G.to_text()) == G


@given(graphs(max_n=9), st.data())
def test_set_operations_match_adjacency_sets(G, data):
    adj = adjacency_sets(G.n, G.edges())
    A = data.draw(st.sets(st.integers(0, G.n - 1)))
    B = data.draw(st.sets(st.integers(0, G.n - 1))) - A
    assert set(bits(G.gamma(mask_of(A)))) == set().union(set(), *(adj[a] for a in A))
    assert G.e_between(mask_of(A), mask_of(B)) == sum(1 for a in A for b in B if b in adj[a])
    assert G.e_within(mask_of(A)) == sum(1 for a, b in combinations(sorted(A), 2) if b in adj[a])
    H = G.restrict(mask_of(A))
    assert all(set(bits(H.adj[v])) == (adj[v] & A if v in A else set()) for v in range(G.n))


@given(graphs(max_n=9))
def test_components_partition_vertices(G):
    comps = G.components()
    assert sum(popcount(c) for c in comps) == G.n
    for c in comps:
        assert G.gamma(c) & ~c == 0


@given(graphs(min_n=2, max_n=9))
def test_codegree_stats(G):
    adj = adjacency_sets(G.n, G.edges())
    s = codegree_stats(G)
    assert s.min_degree == min(len(a) for a in adj)
    assert s.max_codegree == max(len(adj[u] & adj[v]) for u, v in combinations(range(G.n), 2))


@given(graphs(min_n=2, max_n=8), st.data())
def test_coloured_roundtrip_and_partition(G, data):
    blue = [e for e in G.edges() if data.draw(st.booleans())]
    CG = ColouredGraph.from_blue(G, blue)
    assert ColouredGraph.from_text(CG.to_text()) == CG
    assert CG.blue.edge_count() + CG.red.edge_count() == G.edge_count()
    for u, v in G.edges():
        assert CG.colour(u, v) == ("B" if (u, v) in blue else "R")


def test_uniformity_exhaustive_on_complete_graph():
    rep = check_uniformity(Graph.complete(8), 0.25, 1.0)
    assert rep.uniform and rep.verified_pairs > 0


def test_uniformity_flags_a_planted_dense_pair():
    G = Graph.from_edges(8, [(a, b) for a in range(2) for b in range(2, 4)])
    rep = check_uniformity(G, 0.25, 0.1, upper_only=True)
    assert any(v[4] == "pair_upper" for v in rep.violations)
