from itertools import combinations, product

import mpmath
import pytest
from hypothesis import given
from hypothesis import strategies as st

from treeramsey.bits import bits, mask_of, popcount
from treeramsey.errors import PreconditionBroken
from treeramsey.graph_core import ColouredGraph, GnpSpec, Graph, sample_gnp
from treeramsey.ramsey import (
    CSV_HEADER,
    SweepConfig,
    arrow_exhaustive,
    canonical_clique,
    check_colouring,
    eps_good_check,
    extremal_colouring,
    extremal_parts,
    find_clique,
    janson_condition,
    janson_trial,
    mc_sweep,
    non_arrow_frequency,
    random_colouring,
    refine_partition,
    rows_to_csv,
    sparse_cut_colouring,
    tree_family,
    validate_verdict,
    validate_weakly_clique,
    weakly_clique,
)
from treeramsey.trees import enumerate_trees

from oracles import adjacency_sets, graphs_up_to_iso
from strategies import graphs


@given(graphs(max_n=10), st.integers(1, 5))
def test_find_clique_matches_enumeration(G, size):
    c = find_clique(G, size)
    brute = any(all(G.has_edge(a, b) for a, b in combinations(S, 2)) for S in combinations(range(G.n), size))
    assert (c is not None) == brute
    if c is not None:
        assert len(set(c)) == size and all(G.has_edge(a, b) for a, b in combinations(c, 2))


@given(graphs(min_n=3, max_n=12), st.integers(2, 4), st.data())
def test_canonical_clique_matches_product_enumeration(G, k, data):
    labels = data.draw(st.lists(st.integers(-1, k - 1), min_size=G.n, max_size=G.n))
    sets = [[v for v in range(G.n) if labels[v] == i] for i in range(k)]
    if any(not s for s in sets):
        assert canonical_clique(G, sets) is None
        return
    brute = any(all(G.has_edge(a, b) for a, b in combinations(pick, 2)) for pick in product(*sets))
    c = canonical_clique(G, sets)
    assert (c is not None) == brute
    if c is not None:
        assert all(c[i] in sets[i] for i in range(k))
        assert all(G.has_edge(a, b) for a, b in combinations(c, 2))


def test_canonical_clique_rejects_overlap():
    with pytest.raises(ValueError):
        canonical_clique(Graph.complete(4), [[0, 1], [1, 2], [3]])


@given(st.integers(10, 2000), st.floats(0.01, 1.0), st.integers(1, 60), st.integers(1, 4), st.floats(0.05, 5.0))
def test_janson_matches_extended_precision(N, p, m, r, C):
    m = min(m, N)
    res = janson_condition(N, p, m, r, C)
    mpmath.mp.dps = 50
    lhs = mpmath.mpf(m) ** (r + 1) * mpmath.mpf(p) ** ((r + 1) * r // 2)
    rhs = C * mpmath.log(mpmath.binomial(N, m))
    assert abs(res.lhs - float(lhs)) <= 1e-9 * float(lhs)
    assert abs(res.rhs - float(rhs)) <= 1e-9 * max(1.0, float(rhs))
    if abs(lhs - rhs) > 1e-9 * rhs:
        assert res.holds == (lhs >= rhs)


def test_janson_desk_values():
    assert janson_condition(300, 0.3, 13, 2, 1.0).holds
    assert not janson_condition(300, 0.3, 12, 2, 1.0).holds


def test_janson_trial_returns_a_transversal_triangle():
    c = janson_trial(300, 0.3, 7, 2, 1)
    assert c is not None
    G = sample_gnp(GnpSpec(300, 0.3, 1))
    assert all(G.has_edge(a, b) for a, b in combinations(c, 2))


@pytest.mark.parametrize("N,r,n", [(16, 2, 8), (17, 2, 8), (12, 3, 4), (30, 2, 8), (7, 2, 8)])
def test_extremal_colouring_shape(N, r, n):
    CG = extremal_colouring(N, r, n)
    parts = extremal_parts(N, r, n)
    for u, v in CG.base.edges():
        assert CG.colour(u, v) == ("R" if parts[u] == parts[v] else "B")
    if N <= r * n:
        assert len(set(parts)) == min(r, N)
        assert max(parts.count(i) for i in set(parts)) - min(parts.count(i) for i in set(parts)) <= 1
    else:
        assert all(parts.count(i) <= n for i in set(parts))


def test_extremal_colouring_is_a_non_arrow_at_rn():
    fam = enumerate_trees(8, 3)
    v = check_colouring(extremal_colouring(16, 2, 8), 2, fam)
    assert v.kind == "RedTreeMissing" and v.non_arrow


@pytest.mark.parametrize("seed", range(5))
def test_check_colouring_verdicts_validate(seed):
    G = sample_gnp(GnpSpec(14, 0.6, seed))
    fam = enumerate_trees(3, 3)
    for CG in (random_colouring(G, seed), sparse_cut_colouring(G, 2), extremal_colouring(14, 2, 3, G)):
        v = check_colouring(CG, 2, fam)
        assert validate_verdict(CG, 2, fam, v) == []


def arrows_p3_oracle(G):
    """G -> (K_3, P_3): every colouring has a blue triangle or a red path with 2 edges."""
    edges = G.edges()
    tris = [t for t in combinations(range(G.n), 3) if all(G.has_edge(a, b) for a, b in combinations(t, 2))]
    for blue_bits in range(1 << len(edges)):
        blue = {e for i, e in enumerate(edges) if blue_bits >> i & 1}
        has_tri = any(all(tuple(sorted(e)) in blue for e in combinations(t, 2)) for t in tris)
        red_deg = [0] * G.n
        for e in edges:
            if e not in blue:
                red_deg[e[0]] += 1
                red_deg[e[1]] += 1
        if not has_tri and max(red_deg, default=0) < 2:
            return False
    return True


def test_arrow_exhaustive_matches_oracle_on_small_graphs():
    fam = enumerate_trees(2)
    for n, layer in graphs_up_to_iso(5).items():
        for edges in layer:
            G = Graph.from_edges(n, edges)
            res = arrow_exhaustive(G, 2, fam)
            assert (res.kind == "Arrows") == arrows_p3_oracle(G)


def test_arrow_exhaustive_k4_witness_and_k5():
    fam = enumerate_trees(2)
    assert arrow_exhaustive(Graph.complete(5), 2, fam).kind == "Arrows"
    res = arrow_exhaustive(Graph.complete(4), 2, fam)
    assert res.kind == "NonArrowWitness" and res.colourings == 1 << 6
    assert find_clique(res.witness.blue, 3) is None
    assert max(popcount(a) for a in res.witness.red.adj) < 2


def test_weakly_clique_blue_sets_on_sparse_red():
    G = sample_gnp(GnpSpec(100, 0.4, 0))
    out = weakly_clique(G, 10, 2, 2, 2)
    assert out.kind == "BlueSets" and len(out.sets) == 3
    assert validate_weakly_clique(G, out) == []


def test_weakly_clique_certificate_on_dense_red():
    G = sample_gnp(GnpSpec(100, 0.8, 0))
    out = weakly_clique(G, 10, 2, 2, 2, sample_trees=enumerate_trees(4, 2))
    assert out.kind == "UniversalityCertificate" and out.stage == 0
    assert validate_weakly_clique(G, out) == []
    assert all(set(mp.values()) <= set(out.kept) for mp in out.embeddings)


def test_weakly_clique_certificate_after_one_blue_set():
    G = sample_gnp(GnpSpec(100, 0.9, 0))
    adj = list(G.adj)
    far = mask_of(range(50, 100))
    for v in (0, 1):
        adj[v] &= ~far
    for v in range(50, 100):
        adj[v] &= ~0b11
    G = Graph(100, adj)
    out = weakly_clique(G, 10, 2, 2, 2)
    assert out.kind == "UniversalityCertificate" and out.stage == 1 and out.m_s == 20
    assert validate_weakly_clique(G, out) == []


def test_weakly_clique_validator_catches_a_red_edge():
    G = sample_gnp(GnpSpec(100, 0.4, 0))
    out = weakly_clique(G, 10, 2, 2, 2)
    a, b = out.sets[0][0], out.sets[1][0]
    adj = list(G.adj)
    adj[a] |= 1 << b
    adj[b] |= 1 << a
    assert validate_weakly_clique(Graph(100, adj), out)


def test_weakly_clique_size_precondition():
    with pytest.raises(PreconditionBroken):
        weakly_clique(sample_gnp(GnpSpec(50, 0.5, 0)), 10, 2, 2, 2)


def recount(CG, parts, eps, p, r, D):
    N = CG.base.n
    red = adjacency_sets(N, CG.red.edges())
    blue = adjacency_sets(N, CG.blue.edges())
    out = set()
    for i in range(1, r + 1):
        P = set(parts[i])
        if len(P) < (1 - 1 / (2 * D)) * N / r:
            out.add(("a", i, -1))
        for v in P:
            if len(red[v] & P) < p * N / (32 * r):
                out.add(("b", i, v))
            if len(blue[v] & P) > eps * p * N:
                out.add(("c", i, v))
    return out


@pytest.mark.parametrize("seed", range(4))
def test_eps_good_check_matches_recount(seed):
    G = sample_gnp(GnpSpec(120, 0.3, seed))
    CG = random_colouring(G, seed, blue_prob=0.2)
    import numpy as np

    lab = np.random.default_rng(seed).integers(0, 3, size=120)
    parts = [[v for v in range(120) if lab[v] == i] for i in range(3)]
    rep = eps_good_check(CG, parts, 0.1, 0.3, 2, 3)
    assert {(c, i, v) for c, i, v, *_ in rep.violations} == recount(CG, parts, 0.1, 0.3, 2, 3)


def test_eps_good_all_red_split():
    N, r = 40, 2
    CG = ColouredGraph.from_blue(Graph.complete(N), [])
    parts = [[], list(range(20)), list(range(20, 40))]
    assert eps_good_check(CG, parts, 0.1, 1.0, r, 3).ok
    out = refine_partition(CG, parts[1:], 0.1, 1.0, r, 3)
    assert out.parts[0] == () and out.moves == []


@pytest.mark.parametrize("seed", range(4))
def test_refine_partition_passes_checker(seed):
    G = sample_gnp(GnpSpec(150, 0.25, seed))
    CG = extremal_colouring(150, 2, 75, G)
    # perturb: recolour a few edges so some vertices have many blue neighbours inside their part
    blue = set(CG.blue.edges())
    hub = 3
    for w in bits(G.adj[hub]):
        if w < 75:
            blue.add(tuple(sorted((hub, w))))
    CG = ColouredGraph.from_blue(G, sorted(blue))
    out = refine_partition(CG, [range(75), range(75, 150)], 0.05, 0.25, 2, 3)
    assert all(c == "a" for c, *_ in out.report.violations)
    assert recount(CG, out.parts, 0.05, 0.25, 2, 3) <= {("a", i, -1) for i in (1, 2)}
    assert sorted(v for P in out.parts for v in P) == list(range(150))
    assert hub in out.parts[0]


def small_config(**kw):
    base = dict(r=2, D=3, n=4, N_grid=[8, 9, 12], p_grid=[0.5, 0.9], seeds=[0, 1, 2], strategies=["extremal", "random", "sparse-cut"])
    base.update(kw)
    return SweepConfig.from_dict(base)


def test_sweep_deterministic_and_parallel_equal():
    rows = mc_sweep(small_config())
    assert rows_to_csv(rows) == rows_to_csv(mc_sweep(small_config()))
    assert rows == mc_sweep(small_config(workers=2))
    assert rows_to_csv(rows).splitlines()[0] == ",".join(CSV_HEADER)
    assert len(rows) == 3 * 2 * 3 * 3
    assert all(r[9] == "" for r in rows)


def test_sweep_weakly_clique_rows_and_errors():
    rows = mc_sweep(small_config(weakly_clique=True, m=1, N_grid=[70], p_grid=[0.5], seeds=[0]))
    wk = [r for r in rows if r[6].endswith("/weakly-clique")]
    assert len(wk) == 3
    assert all(r[7] in ("Skipped", "BlueSets+Clique", "BlueSets+NoClique", "Universal") or r[7].startswith("Error(") for r in wk)


def test_sweep_config_rejects_unknown_keys():
    with pytest.raises(ValueError):
        SweepConfig.from_dict(dict(r=2, D=3, n=4, N_grid=[8], p_grid=[0.5], seeds=[0], colour="x"))
    with pytest.raises(ValueError):
        small_config(strategies=["nope"])


def test_non_arrow_frequency():
    rows = [["2", "3", "8", "16", "0.5", str(s), "extremal", "RedTreeMissing" if s < 3 else "BlueClique", "0", ""] for s in range(4)]
    f, se, k = non_arrow_frequency(rows)[16]
    assert (f, k) == (0.75, 4) and abs(se - (0.75 * 0.25 / 4) ** 0.5) < 1e-12


def test_tree_family_regimes():
    fam, regime = tree_family(4, 3)
    assert regime == "enumerated" and len(fam) == 2
    fam, regime = tree_family(20, 3, seed=1, samples=5)
    assert regime == "sampled" and len(fam) == 5
