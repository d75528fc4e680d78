import math
from itertools import product

import pytest
from hypothesis import given
from hypothesis import strategies as st

from treeramsey.errors import CapExceeded, InvalidBeta, InvalidDegreeBound
from treeramsey.trees import (
    SubtreeDecomposition,
    Tree,
    cut_tree,
    enumerate_trees,
    find_split_edge,
    gen_random_tree,
    path_tree,
    split_sides,
    star_tree,
    validate_decomposition,
)

from oracles import canonical_code
from strategies import trees


def free_tree_classes(n_vertices, D):
    """Isomorphism classes of labelled trees, decoded from every Pruefer sequence."""
    if n_vertices <= 2:
        return 1
    seen = set()
    for seq in product(range(n_vertices), repeat=n_vertices - 2):
        degree = [1] * n_vertices
        for x in seq:
            degree[x] += 1
        if max(degree) > D:
            continue
        edges, deg = [], degree[:]
        for x in seq:
            leaf = min(v for v in range(n_vertices) if deg[v] == 1)
            edges.append((leaf, x))
            deg[leaf] -= 1
            deg[x] -= 1
        u, v = [w for w in range(n_vertices) if deg[w] == 1]
        edges.append((u, v))
        seen.add(canonical_code(n_vertices, edges))
    return len(seen)


@pytest.mark.parametrize("n_edges", range(1, 7))
@pytest.mark.parametrize("D", [2, 3, 4, 9])
def test_enumeration_counts_match_pruefer_oracle(n_edges, D):
    fam = enumerate_trees(n_edges, D)
    assert len(fam) == free_tree_classes(n_edges + 1, D)
    assert all(T.edge_count == n_edges and T.max_degree() <= D for T in fam)


def test_enumeration_known_counts():
    assert [len(enumerate_trees(k)) for k in range(1, 10)] == [1, 1, 2, 3, 6, 11, 23, 47, 106]
    assert len(enumerate_trees(3, 2)) == 1
    with pytest.raises(CapExceeded):
        enumerate_trees(10)


@given(st.integers(1, 80), st.integers(2, 6), st.integers(0, 10**6))
def test_random_tree_degree_and_size(n, D, seed):
    T = gen_random_tree(n, D, seed)
    assert T.edge_count == n and T.n == n + 1
    assert T.max_degree() <= D
    assert gen_random_tree(n, D, seed) == T


def test_random_tree_small_cases():
    assert gen_random_tree(1, 2, 5).edge_count == 1
    T = gen_random_tree(5, 2, 3)
    assert sorted(T.degree(v) for v in range(T.n)) == [1, 1, 2, 2, 2, 2]
    with pytest.raises(InvalidDegreeBound):
        gen_random_tree(4, 1, 0)


def test_random_tree_labelled_frequencies_are_flat():
    # 4 vertices, D=3: all 16 labelled trees allowed; check counts are not wildly skewed
    counts = {}
    for seed in range(3200):
        T = gen_random_tree(3, 3, seed)
        key = canonical_code(4, T.edges())
        counts[key] = counts.get(key, 0) + 1
    # star classes: 4 labelled stars vs 12 labelled paths
    star = canonical_code(4, [(0, 1), (0, 2), (0, 3)])
    assert abs(counts[star] / 3200 - 4 / 16) < 0.04


@given(trees(max_n=40))
def test_text_roundtrip_and_colour_convention(T):
    assert Tree.from_text("# hdr\n" + T.to_text()) == T
    c1, c2 = T.colour_class(1), T.colour_class(2)
    assert len(c1) + len(c2) == T.n and len(c2) >= len(c1)
    for u, v in T.edges():
        assert T.colour[u] != T.colour[v]


@given(trees(min_n=2, max_n=60, max_degree=4))
def test_split_edge_is_best_by_scan(T):
    D = max(2, T.max_degree())
    e = find_split_edge(T, D)
    a, b = split_sides(T, e)
    assert len(a) + len(b) == T.n
    need = math.ceil(T.edge_count / D)
    assert min(len(a), len(b)) >= need
    best = 0
    for u, v in T.edges():
        below = T.subtree_sizes[u if T.parent[u] == v else v]
        best = max(best, min(below, T.n - below))
    assert min(len(a), len(b)) == best


def test_split_edge_examples():
    e = find_split_edge(path_tree(4), 2)
    assert sorted((e.side1, e.side2)) == [2, 3]
    e = find_split_edge(star_tree(4), 4)
    assert sorted((e.side1, e.side2)) == [1, 4]
    T = gen_random_tree(60, 3, 5)
    e = find_split_edge(T, 3)
    assert min(e.side1, e.side2) >= 20


@given(trees(min_n=1, max_n=200, max_degree=5), st.sampled_from([0.02, 0.05, 0.1, 0.3]))
def test_cut_tree_invariants(T, beta):
    D = max(2, T.max_degree())
    beta = max(beta, 1 / T.n)
    dec = cut_tree(T, beta, D)
    assert validate_decomposition(T, dec) == []
    back = SubtreeDecomposition.from_text(dec.to_text(T.n))
    assert back.subtrees == dec.subtrees and back.cluster_edges == dec.cluster_edges


def test_cut_tree_path_bounds():
    T = path_tree(100)
    dec = cut_tree(T, 0.05, 2)
    assert dec.t <= 160
    assert all(len(v) <= 2**4 * 0.05 * 101 for v, _ in dec.subtrees)
    R = gen_random_tree(300, 3, 1)
    assert validate_decomposition(R, cut_tree(R, 0.02, 3)) == []
    assert validate_decomposition(T, cut_tree(R, 0.02, 3)) != []
    with pytest.raises(InvalidBeta):
        cut_tree(T, 0.001, 2)


def test_validator_reports_odd_root_and_hand_split():
    T = path_tree(5)  # 0-1-2-3-4-5 rooted at 0
    good = SubtreeDecomposition([(frozenset({0, 1}), 0), (frozenset({2, 3, 4, 5}), 2)], [(0, 1)], 1.0, 2, ())
    assert validate_decomposition(T, good) == []
    odd = SubtreeDecomposition([(frozenset({0, 1, 2}), 0), (frozenset({3, 4, 5}), 3)], [(0, 1)], 1.0, 2, ())
    assert any("odd depth" in p for p in validate_decomposition(T, odd))
