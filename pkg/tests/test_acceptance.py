"""Acceptance criteria 1-9. Each test records one PASS/FAIL line (see the terminal summary)."""

import json
import math
import time
from itertools import combinations
from pathlib import Path

import numpy as np
import pytest

from treeramsey.bits import bits, mask_of
from treeramsey.cli import arrow_witness_problems
from treeramsey.embedder import (
    HallAssignment,
    PartialEmbedding,
    StarRequest,
    embed_three_classes,
    replay_goodness,
    star_hall_embed,
    three_hosts,
    validate_embedding,
)
from treeramsey.errors import TreeRamseyError
from treeramsey.expanders import BipartiteHost, check_haxell, check_strong, check_weak, extract_expander
from treeramsey.graph_core import GnpSpec, Graph, sample_gnp
from treeramsey.ramsey import (
    SweepConfig,
    arrow_exhaustive,
    extremal_colouring,
    janson_condition,
    janson_trial,
    mc_sweep,
    non_arrow_frequency,
    random_colouring,
    validate_weakly_clique,
    weakly_clique,
)
from treeramsey.reduced import check_mat_trian, mat_trian_decompose
from treeramsey.trees import cut_tree, enumerate_trees, gen_random_tree, validate_decomposition

from instances import certified_three_class_instances
from oracles import (
    adjacency_sets,
    demand_hall_ok,
    graphs_up_to_iso,
    is_weak_expander,
    m_good_pairs_numpy,
    max_matching_size,
    strong_small_set_ok,
)

ROOT = Path(__file__).resolve().parents[1]
FALSIFICATIONS = ROOT / "artifacts" / "falsifications"


def test_criterion_1_small_arrowing(report_line):
    path2 = enumerate_trees(2)
    three = enumerate_trees(3, 3)
    notes, ok = [], True

    t0 = time.perf_counter()
    r5 = arrow_exhaustive(Graph.complete(5), 2, path2)
    r4 = arrow_exhaustive(Graph.complete(4), 2, path2)
    dt_small = time.perf_counter() - t0
    ok &= r5.kind == "Arrows" and r5.colourings == 2**10
    ok &= r4.kind == "NonArrowWitness" and not arrow_witness_problems(r4.witness, 2, path2)
    ok &= dt_small < 1.0
    notes.append(f"K5 {r5.kind}, K4 {r4.kind} in {dt_small:.2f}s")

    t0 = time.perf_counter()
    r7 = arrow_exhaustive(Graph.complete(7), 2, three)
    ok &= r7.kind == "Arrows" and r7.colourings == 2**21
    for T in three:
        r6 = arrow_exhaustive(Graph.complete(6), 2, [T])
        ok &= r6.kind == "NonArrowWitness" and r6.colourings == 2**15
        ok &= not arrow_witness_problems(r6.witness, 2, [T])
    dt_big = time.perf_counter() - t0
    ok &= dt_big < 300
    notes.append(f"K7 {r7.kind} ({r7.survivors} clique-free survivors), K6 witness per 3-edge tree, {dt_big:.1f}s")
    assert report_line(1, ok, "; ".join(notes))


def test_criterion_2_weakly_clique_witnesses(report_line):
    n, m, r, D, N = 10, 2, 2, 2, 100
    blue_probs = (0.1, 0.3, 0.5, 0.7, 0.9)
    kinds, bad = {}, []
    for i in range(500):
        G = sample_gnp(GnpSpec(N, 0.4, i))
        if i % 2 == 0:
            CG = random_colouring(G, i, blue_prob=blue_probs[(i // 2) % 5])
        else:
            CG = extremal_colouring(N, r, n, G)
        red = CG.red
        try:
            out = weakly_clique(red, n, m, r, D)
        except TreeRamseyError as exc:
            bad.append((i, type(exc).__name__))
            continue
        kinds[out.kind] = kinds.get(out.kind, 0) + 1
        if out.kind == "BlueSets":
            red_pairs = {frozenset(e) for e in red.edges()}
            cross = sum(
                1
                for a, b in combinations(out.sets, 2)
                for u in a
                for v in b
                if frozenset((u, v)) in red_pairs
            )
            sizes_ok = len(out.sets) == r + 1 and all(len(s) == m for s in out.sets)
            disjoint = len({v for s in out.sets for v in s}) == (r + 1) * m
            if cross or not sizes_ok or not disjoint:
                bad.append((i, "BlueSets"))
        else:
            hax = check_haxell(red, m, D, n + 1, within=mask_of(out.kept))
            if not hax.certified or validate_weakly_clique(red, out):
                bad.append((i, "Certificate"))
    ok = not bad
    assert report_line(2, ok, f"500 instances, outcomes {dict(sorted(kinds.items()))}, invalid {len(bad)} {bad[:3]}")


def _criterion3_instance(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(8, 41))
    m1 = int(rng.integers(1, 4))
    D = int(rng.integers(1, 4))
    if (2 * D + 2) * m1 >= n:
        return None
    m2 = int(rng.integers(1, n - (2 * D + 2) * m1 + 1))
    G = sample_gnp(GnpSpec(n, float(rng.uniform(0.4, 0.95)), seed))
    if rng.random() < 0.5:
        # thin out a few vertices so the small-set property tends to fail there
        adj = list(G.adj)
        for v in rng.choice(n, size=int(rng.integers(1, m1 + 1)), replace=False):
            v = int(v)
            for w in bits(adj[v])[D:]:
                adj[v] &= ~(1 << w)
                adj[w] &= ~(1 << v)
        G = Graph(n, adj)
    return G, m1, m2, D


def test_criterion_3_extraction(report_line):
    done, seed, bad, removed_total, nonzero = 0, 0, [], 0, 0
    while done < 1000:
        inst = _criterion3_instance(seed)
        seed += 1
        if inst is None:
            continue
        G, m1, m2, D = inst
        if not check_weak(G, m1, m2).certified:
            continue
        done += 1
        try:
            ext = extract_expander(G, m1, m2, D)
        except TreeRamseyError as exc:
            bad.append((seed - 1, type(exc).__name__))
            continue
        removed_total += len(ext.removed)
        nonzero += bool(ext.removed)
        adj = adjacency_sets(G.n, G.edges())
        kept = ext.kept_mask
        good = (
            len(ext.removed) <= m1
            and check_strong(G, m1, D, within=kept).certified
            and check_weak(G, m1, m2, within=kept).certified
            and strong_small_set_ok(adj, ext.kept, m1, D)
            and is_weak_expander(G.n, adj, ext.kept, m1, m2)
        )
        if not good:
            bad.append((seed - 1, "certification"))
    ok = not bad
    detail = f"1000 pre-screened graphs ({seed} drawn), {nonzero} needed removals ({removed_total} vertices), failures {len(bad)} {bad[:3]}"
    assert report_line(3, ok, detail)


def test_criterion_4_star_hall(report_line):
    rng = np.random.default_rng(4)
    agree, assigned = 0, 0
    for _ in range(1000):
        a, b = int(rng.integers(1, 13)), int(rng.integers(1, 13))
        p = float(rng.uniform(0.1, 0.9))
        edges = [(i, a + j) for i in range(a) for j in range(b) if rng.random() < p]
        G = Graph.from_edges(a + b, edges)
        demands = tuple(int(x) for x in rng.integers(0, 4, size=a))
        H = BipartiteHost.of(G, range(a), range(a, a + b))
        res = star_hall_embed(H, StarRequest(tuple(range(a)), demands))
        adj = adjacency_sets(G.n, G.edges())
        neigh = [adj[i] for i in range(a)]
        truth = demand_hall_ok(neigh, demands)
        if isinstance(res, HallAssignment):
            used = [y for ls in res.leaves for y in ls]
            valid = len(used) == len(set(used)) and all(
                len(ls) == demands[i] and set(ls) <= neigh[i] for i, ls in enumerate(res.leaves)
            )
            agree += truth and valid
            assigned += 1
        else:
            nb = set().union(*(neigh[i] for i in res.centers))
            agree += (not truth) and len(nb) < sum(demands[i] for i in res.centers)
    ok = agree == 1000
    assert report_line(4, ok, f"{agree}/1000 agree with subset enumeration ({assigned} assignments, {1000 - assigned} violators)")


def test_criterion_5_cut_tree(report_line):
    rng = np.random.default_rng(5)
    passed, worst_t, worst_size = 0, 0.0, 0.0
    for i in range(1000):
        D = int(rng.choice([2, 3, 4, 5]))
        beta = float(rng.choice([0.02, 0.05, 0.1]))
        lo = max(1, math.ceil(1 / beta) - 1)  # cut_tree needs beta >= 1/|V(T)|
        n_edges = int(rng.integers(lo, 300))
        T = gen_random_tree(n_edges, D, 50_000 + i)
        dec = cut_tree(T, beta, D)
        if validate_decomposition(T, dec) == []:
            passed += 1
        worst_t = max(worst_t, dec.t / (4 * D / beta))
        worst_size = max(worst_size, max(len(v) for v, _ in dec.subtrees) / (D**4 * beta * T.n))
    ok = passed == 1000
    detail = f"{passed}/1000 valid; max t/(4D/beta) = {worst_t:.3f}, max size/(D^4 beta n) = {worst_size:.3f}"
    assert report_line(5, ok, detail)


def _mat_trian_ok(n, edges):
    F = Graph.from_edges(n, edges)
    dec = mat_trian_decompose(F)
    if check_mat_trian(F, dec):
        return False
    tri = {v for t in dec.Gamma for v in t}
    rest = [v for v in range(n) if v not in tri]
    idx = {v: i for i, v in enumerate(rest)}
    sub = [(idx[u], idx[v]) for u, v in edges if u in idx and v in idx]
    return len(dec.M) == max_matching_size(len(rest), sub)


def test_criterion_6_mat_trian(report_line):
    layers = graphs_up_to_iso(8)
    total = sum(len(v) for v in layers.values())
    passed = sum(_mat_trian_ok(n, edges) for n, layer in layers.items() for edges in layer)
    rng = np.random.default_rng(6)
    rand_pass = 0
    for _ in range(1000):
        n = int(rng.integers(1, 15))
        p = float(rng.uniform(0.05, 0.95))
        edges = [(u, v) for u, v in combinations(range(n), 2) if rng.random() < p]
        rand_pass += _mat_trian_ok(n, edges)
    ok = passed == total and rand_pass == 1000
    detail = f"{passed}/{total} graphs on <= 8 vertices up to isomorphism, {rand_pass}/1000 random on <= 14"
    assert report_line(6, ok, detail)


def _numpy_stepwise_bad(emb, hosts, m, D):
    G = emb.host
    A = np.zeros((G.n, G.n), dtype=np.int64)
    for u, v in G.edges():
        A[u, v] = A[v, u] = 1
    bad = []
    replay = PartialEmbedding(emb.tree, G)
    for step, v in enumerate(emb.order, start=1):
        replay.place(v, emb.image[v])
        placed = set(replay.order)
        tdeg = {w: sum(1 for x in emb.tree.neighbours[w] if x in placed) for w in placed}
        used = {replay.image[w]: w for w in placed}
        for H in hosts:
            for side in (1, 2):
                px, py = bits(H.part(side)), bits(H.other(side))
                dem = {x: D - tdeg[used[x]] if x in used else D for x in px}
                if not m_good_pairs_numpy(A, set(used), px, py, dem, m, D):
                    bad.append(step)
                    break
            else:
                continue
            break
    return bad


def test_criterion_7_m_goodness(report_line):
    instances = certified_three_class_instances(300)
    last_seed = instances[-1][0]
    failures = []
    for seed, (T, U, G, c, m, D) in instances:
        hosts = three_hosts(G, c.V1, c.V2, c.V3)
        reason = ""
        try:
            emb = embed_three_classes(T, *U, c.V1, c.V2, c.V3, G, m, D)
        except TreeRamseyError as exc:
            reason = f"{type(exc).__name__}: {exc}"
            emb = None
        if emb is not None:
            contain = {v: V for Ui, V in zip(U, (c.V1, c.V2, c.V3)) for v in Ui}
            problems = validate_embedding(T, G, emb.mapping(), containment=contain)
            lib_bad = replay_goodness(emb, hosts, m, D)
            np_bad = _numpy_stepwise_bad(emb, hosts, m, D)
            if problems or lib_bad or np_bad:
                reason = f"containment {problems[:2]} replay {lib_bad[:5]} oracle {np_bad[:5]}"
        if reason:
            failures.append(seed)
            FALSIFICATIONS.mkdir(parents=True, exist_ok=True)
            text = f"# criterion 7 seed={seed} m={m} D={D}\n# {reason}\n" + T.to_text()
            if emb is not None:
                text += emb.to_text()
            (FALSIFICATIONS / f"m_good_seed{seed}.txt").write_text(text)
    ok = not failures
    detail = f"300 certified instances (seeds 0..{last_seed}), falsifications {len(failures)} {failures[:5]}"
    assert report_line(7, ok, detail)


def test_criterion_8_janson_calibration(report_line):
    cfg = json.loads((ROOT / "configs" / "janson.json").read_text())
    N, p, r, C, m = cfg["N"], cfg["p"], cfg["r"], cfg["C"], cfg["m"]
    cond = janson_condition(N, p, m, r, C)
    lo, hi = cfg["acceptance_seeds"]
    hits = 0
    for seed in range(lo, hi):
        c = janson_trial(N, p, m, r, seed)
        if c is not None:
            G = sample_gnp(GnpSpec(N, p, seed))
            assert all(G.has_edge(a, b) for a, b in combinations(c, 2))
            hits += 1
    rate = hits / (hi - lo)
    ok = cond.holds and rate >= 0.95 and (hi - lo) == 200
    detail = f"C={C} m={m} p={p} (lhs {cond.lhs:.3f} vs rhs {cond.rhs:.3f}), transversal triangle in {hits}/{hi - lo} = {rate:.3f}"
    assert report_line(8, ok, detail)


def test_criterion_9_monotone_sweep(report_line):
    cfg = SweepConfig.load(ROOT / "configs" / "sweep_monotone.json")
    assert (cfg.r, cfg.D, cfg.n, cfg.p_grid, cfg.N_grid, len(cfg.seeds)) == (2, 3, 8, [0.5], list(range(16, 29)), 100)
    freq = non_arrow_frequency(mc_sweep(cfg), "extremal")
    Ns = sorted(freq)
    inversions = []
    for a, b in zip(Ns, Ns[1:]):
        fa, sa, _ = freq[a]
        fb, sb, _ = freq[b]
        if fb > fa:
            inversions.append((a, b, fb - fa, 2 * math.hypot(sa, sb)))
    ok = len(inversions) == 0 or (len(inversions) == 1 and inversions[0][2] <= inversions[0][3])
    table = " ".join(f"{N}:{freq[N][0]:.2f}" for N in Ns)
    assert report_line(9, ok, f"non-arrow frequency {table}; inversions {inversions}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
