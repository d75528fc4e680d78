"""Tree embedding engines.

Three routes live here: leaf-by-leaf extension that keeps an m-good invariant in
one or more bipartite hosts, the many-leaves pipeline built on top of it (with a
demand-Hall matching for the final leaves), and a plain backtracking embedder for
hosts satisfying the two small-set expansion conditions.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from treeramsey.bits import bits, iter_bits, mask_of, popcount
from treeramsey.errors import (
    BudgetExhausted,
    GoodnessUnrecoverable,
    HypothesisBroken,
    InternalAssertion,
    NoCandidate,
    NoEmbedding,
    SamplingExhausted,
)
from treeramsey.expanders import (
    DEFAULT_BUDGET,
    BipartiteHost,
    ExpansionVerdict,
    _Counter,
    as_mask,
    check_bip_expander,
    check_haxell,
    check_weak,
    clean_three_hosts,
)
from treeramsey.graph_core import Graph
from treeramsey.trees import Tree, find_split_edge, split_sides

PLACEMENT_BUDGET = 100_000


class PartialEmbedding:
    """Injective map from a connected part of ``tree`` into ``host``, grown one vertex at a time."""

    __slots__ = ("tree", "host", "image", "pre", "used", "order", "dom_degree", "certified", "placements")

    def __init__(self, tree: Tree, host: Graph):
        self.tree = tree
        self.host = host
        self.image = [-1] * tree.n
        self.pre: dict[int, int] = {}
        self.used = 0
        self.order: list[int] = []
        self.dom_degree = [0] * tree.n
        self.certified = False
        self.placements = 0

    def copy(self) -> PartialEmbedding:
        e = PartialEmbedding.__new__(PartialEmbedding)
        e.tree, e.host = self.tree, self.host
        e.image = self.image[:]
        e.pre = dict(self.pre)
        e.used = self.used
        e.order = self.order[:]
        e.dom_degree = self.dom_degree[:]
        e.certified = self.certified
        e.placements = self.placements
        return e

    def __len__(self) -> int:
        return len(self.order)

    @property
    def complete(self) -> bool:
        return len(self.order) == self.tree.n

    def is_placed(self, v: int) -> bool:
        return self.image[v] >= 0

    def place(self, v: int, x: int) -> None:
        if self.image[v] >= 0:
            raise ValueError(f"tree vertex {v} is already placed")
        if self.used >> x & 1:
            raise ValueError(f"host vertex {x} is already used")
        placed_nbrs = [w for w in self.tree.neighbours[v] if self.image[w] >= 0]
        if self.order and not placed_nbrs:
            raise ValueError(f"tree vertex {v} would disconnect the embedded subtree")
        for w in placed_nbrs:
            if not self.host.has_edge(x, self.image[w]):
                raise ValueError(f"tree edge {v}-{w} is not mapped to a host edge")
            self.dom_degree[w] += 1
        self.dom_degree[v] = len(placed_nbrs)
        self.image[v] = x
        self.pre[x] = v
        self.used |= 1 << x
        self.order.append(v)

    def unplace_last(self) -> None:
        v = self.order.pop()
        x = self.image[v]
        for w in self.tree.neighbours[v]:
            if self.image[w] >= 0:
                self.dom_degree[w] -= 1
        self.dom_degree[v] = 0
        self.image[v] = -1
        del self.pre[x]
        self.used &= ~(1 << x)

    def mapping(self) -> dict[int, int]:
        return {v: self.image[v] for v in self.order}

    def to_text(self, tree_file: str = "-", graph_file: str = "-") -> str:
        lines = [f"p embed {tree_file} {graph_file}"]
        lines += [f"{v} {self.image[v]}" for v in self.order]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, tree: Tree, host: Graph) -> PartialEmbedding:
        e = cls(tree, host)
        for ln in text.splitlines():
            parts = ln.split()
            if not parts or parts[0] in ("#", "p") or parts[0].startswith("#"):
                continue
            e.place(int(parts[0]), int(parts[1]))
        return e

    @classmethod
    def from_mapping(cls, tree: Tree, host: Graph, mapping: dict[int, int], order=None) -> PartialEmbedding:
        e = cls(tree, host)
        for v in order if order is not None else _connected_order(tree, mapping):
            e.place(v, mapping[v])
        return e


def _connected_order(tree: Tree, domain) -> list[int]:
    """BFS order of ``domain`` (assumed connected in ``tree``) from its smallest vertex."""
    dom = set(domain)
    if not dom:
        return []
    start = min(dom)
    order, seen, queue = [], {start}, deque([start])
    while queue:
        x = queue.popleft()
        order.append(x)
        for y in tree.neighbours[x]:
            if y in dom and y not in seen:
                seen.add(y)
                queue.append(y)
    return order


def validate_embedding(tree: Tree, host: Graph, mapping: dict[int, int], *, containment=None, complete: bool = True) -> list[str]:
    """Independent scan: injectivity, edge preservation, optional per-vertex target sets.

    ``containment`` maps tree vertices to host masks their image must lie in.
    """
    problems = []
    if complete and len(mapping) != tree.n:
        problems.append(f"{tree.n - len(mapping)} tree vertices unmapped")
    seen: dict[int, int] = {}
    for v, x in mapping.items():
        if not 0 <= x < host.n:
            problems.append(f"vertex {v} mapped outside the host ({x})")
            continue
        if x in seen:
            problems.append(f"vertices {seen[x]} and {v} share image {x}")
        seen[x] = v
    for u, w in tree.edges():
        if u in mapping and w in mapping and not host.has_edge(mapping[u], mapping[w]):
            problems.append(f"edge {u}-{w} maps to non-edge {mapping[u]}-{mapping[w]}")
    if containment is not None:
        for v, x in mapping.items():
            allowed = containment.get(v) if isinstance(containment, dict) else containment[v]
            if allowed is not None and not allowed >> x & 1:
                problems.append(f"vertex {v} mapped to {x} outside its target set")
    return problems


# ============================================================================
# m-goodness
# ============================================================================


@dataclass
class GoodState:
    embedding: PartialEmbedding
    hosts: tuple[BipartiteHost, ...]
    m: int
    D: int

    @property
    def host_bipartition(self) -> BipartiteHost:
        return self.hosts[0]


def _demands(emb: PartialEmbedding, part: int, D: int) -> dict[int, int]:
    pre, deg = emb.pre, emb.dom_degree
    return {x: (D - deg[pre[x]]) if x in pre else D for x in iter_bits(part)}


def is_m_good(
    emb: PartialEmbedding,
    H: BipartiteHost,
    m: int,
    D: int,
    *,
    budget: int = DEFAULT_BUDGET,
    sides=(1, 2),
    must_hit: int | None = None,
) -> ExpansionVerdict:
    """Check |N_H(X) minus used| >= sum of residual demands over every X inside one part, |X| <= m.

    Residual demand is D - (degree in the embedded subtree) for used vertices and
    D for unused ones.  ``must_hit`` restricts the search to sets meeting that mask,
    which is all that can break after a single placement whose image has
    neighbourhood ``must_hit``.
    """
    counter = _Counter(budget)
    adj = H.graph.adj
    params = (("m", m), ("D", D))
    for side in sides:
        part = H.part(side)
        free_other = H.other(side) & ~emb.used
        dem = _demands(emb, part, D)
        verts = bits(part)

        def rec(start, pm, gm, k, d, hit):
            for i in range(start, len(verts)):
                v = verts[i]
                counter.tick()
                pm2, gm2, d2 = pm | (1 << v), gm | adj[v], d + dem[v]
                hit2 = hit or must_hit is None or bool(must_hit >> v & 1)
                lhs = popcount(gm2 & free_other)
                if lhs >= d2 + D * (m - k - 1):
                    continue  # each extra vertex adds at most D demand
                if lhs < d2 and hit2:
                    return pm2, lhs
                if k + 1 < m:
                    found = rec(i + 1, pm2, gm2, k + 1, d2, hit2)
                    if found:
                        return found
            return None

        found = rec(0, 0, 0, 0, 0, False)
        if found:
            return ExpansionVerdict("SmallSetViolation", "exhaustive", tuple(bits(found[0])), observed=found[1], side=side, params=params)
    return ExpansionVerdict("Certified", "exhaustive", params=params)


def check_mew(emb: PartialEmbedding, H: BipartiteHost, m: int, D: int, *, budget: int = DEFAULT_BUDGET) -> ExpansionVerdict:
    """Every X inside one part with m <= |X| <= 2m keeps at least 2Dm+2 unused neighbours."""
    counter = _Counter(budget)
    adj = H.graph.adj
    need = 2 * D * m + 2
    for side in (1, 2):
        part = H.part(side)
        free_other = H.other(side) & ~emb.used
        verts = bits(part)

        def rec(start, gm, pm, k):
            for i in range(start, len(verts)):
                counter.tick()
                v = verts[i]
                gm2, pm2 = gm | adj[v], pm | (1 << v)
                cnt = popcount(gm2 & free_other)
                if cnt >= need:
                    continue  # supersets only gain neighbours
                if k + 1 >= m:
                    return pm2, cnt
                found = rec(i + 1, gm2, pm2, k + 1)
                if found:
                    return found
            return None

        found = rec(0, 0, 0, 0)
        if found:
            return ExpansionVerdict("SmallSetViolation", "exhaustive", tuple(bits(found[0])), observed=found[1], side=side)
    return ExpansionVerdict("Certified", "exhaustive")


def _placement_ok(emb: PartialEmbedding, y: int, hosts, m: int, D: int, budget: int) -> bool:
    ny = emb.host.adj[y]
    for H in hosts:
        side = H.side_of(y)
        if not side:
            continue
        if not is_m_good(emb, H, m, D, budget=budget, sides=(3 - side,), must_hit=ny).certified:
            return False
    return True


def extend_leaf(state: GoodState, parent: int, new_leaf: int, *, target=None, order: str = "id", budget: int = DEFAULT_BUDGET) -> GoodState:
    """Map ``new_leaf`` to the first unused neighbour of image(parent) that keeps every host m-good."""
    emb, D = state.embedding, state.D
    if not emb.is_placed(parent):
        raise ValueError(f"parent {parent} is not embedded")
    if emb.dom_degree[parent] >= D:
        raise ValueError(f"parent {parent} already has degree {D}")
    x = emb.image[parent]
    if target is None:
        side = state.hosts[0].side_of(x)
        target = state.hosts[0].other(side) if side else 0
    cands = emb.host.adj[x] & ~emb.used & as_mask(target)
    if not cands:
        raise NoCandidate(f"image {x} of {parent} has no unused neighbour in the target set")
    for y in _ordered(emb, cands, order):
        new = emb.copy()
        new.place(new_leaf, y)
        new.placements += 1
        if _placement_ok(new, y, state.hosts, state.m, D, budget):
            return GoodState(new, state.hosts, state.m, D)
    raise GoodnessUnrecoverable(f"no neighbour of {x} keeps the embedding {state.m}-good")


def _ordered(emb: PartialEmbedding, cands: int, order: str) -> list[int]:
    ys = bits(cands)
    if order == "degree":
        free = ~emb.used
        ys.sort(key=lambda y: (popcount(emb.host.adj[y] & free), y))
    return ys


# ============================================================================
# Three-class embedding
# ============================================================================


def three_hosts(G: Graph, V1, V2, V3) -> tuple[BipartiteHost, BipartiteHost, BipartiteHost]:
    V1, V2, V3 = as_mask(V1), as_mask(V2), as_mask(V3)
    return BipartiteHost(G, V1, V3), BipartiteHost(G, V2, V3), BipartiteHost(G, V1 | V2, V3)


def class_labels(T: Tree, U1, U2, U3) -> list[int]:
    """Per-vertex class index 1..3; checks that U1+U2 and U3 are the two bipartition classes."""
    label = [0] * T.n
    for i, U in enumerate((U1, U2, U3), start=1):
        for v in U:
            if label[v]:
                raise ValueError(f"tree vertex {v} appears in two classes")
            label[v] = i
    if 0 in label:
        raise ValueError("U1, U2, U3 must cover the tree")
    side = [T.depth[v] & 1 for v in range(T.n)]
    s12 = {side[v] for v in range(T.n) if label[v] in (1, 2)}
    s3 = {side[v] for v in range(T.n) if label[v] == 3}
    if len(s12) > 1 or len(s3) > 1 or (s12 and s12 == s3):
        raise ValueError("U1+U2 and U3 must be the two bipartition classes of the tree")
    return label


def embed_three_classes(
    T: Tree,
    U1,
    U2,
    U3,
    V1,
    V2,
    V3,
    G: Graph,
    m: int,
    D: int,
    *,
    certify: bool = True,
    backtrack: int = 8,
    placement_budget: int = PLACEMENT_BUDGET,
    full_check_every: int = 0,
    budget: int = DEFAULT_BUDGET,
) -> PartialEmbedding:
    """Embed T with U_i into V_i while staying m-good in G[V1,V3], G[V2,V3] and G[V1+V2,V3].

    Vertices are added in BFS order from the root.  Each placement takes the
    smallest-id candidate that keeps all three hosts m-good; if none does, earlier
    placements are revisited up to ``backtrack`` levels back.
    """
    label = class_labels(T, U1, U2, U3)
    Vs = [as_mask(V1), as_mask(V2), as_mask(V3)]
    sizes = [sum(1 for v in range(T.n) if label[v] == i) for i in (1, 2, 3)]
    for i in range(3):
        if popcount(Vs[i]) < sizes[i] + 3 * D * m:
            raise HypothesisBroken(f"|V{i + 1}| = {popcount(Vs[i])} < |U{i + 1}| + 3Dm = {sizes[i] + 3 * D * m}")
    hosts = three_hosts(G, *Vs)
    if certify:
        for idx, H in enumerate(hosts):
            v = check_bip_expander(H, m, D, budget=budget)
            if not v.certified:
                raise HypothesisBroken(f"host {idx} is not a bipartite ({m},{D})-expander: {v.kind} X={v.X}")
    order = T.bfs_order
    emb = PartialEmbedding(T, G)
    stack: list[list[int]] = []
    deepest = 0
    tried = 0
    while len(emb) < T.n:
        i = len(emb)
        if len(stack) == i:
            v = order[i]
            target = Vs[label[v] - 1] & ~emb.used
            if i:
                target &= G.adj[emb.image[T.parent[v]]]
            stack.append(bits(target)[::-1])
        cands = stack[i]
        placed = False
        while cands:
            y = cands.pop()
            tried += 1
            if tried > placement_budget:
                raise GoodnessUnrecoverable(f"placement budget {placement_budget} exhausted at step {i}")
            emb.place(order[i], y)
            ok = (
                all(is_m_good(emb, H, m, D, budget=budget).certified for H in hosts)
                if i == 0
                else _placement_ok(emb, y, hosts, m, D, budget)
            )
            if ok:
                placed = True
                break
            emb.unplace_last()
        if placed:
            deepest = max(deepest, len(emb))
            if full_check_every and len(emb) % full_check_every == 0:
                for H in hosts:
                    if not is_m_good(emb, H, m, D, budget=budget).certified:
                        raise InternalAssertion(f"incremental check missed a violation at step {len(emb)}")
            continue
        stack.pop()
        if i == 0 or deepest - (i - 1) > backtrack:
            raise GoodnessUnrecoverable(f"no m-good placement for tree vertex {order[i]} (step {i})")
        emb.unplace_last()
    emb.placements = tried
    return emb


def replay_goodness(emb: PartialEmbedding, hosts, m: int, D: int, *, budget: int = DEFAULT_BUDGET) -> list[int]:
    """Steps (prefix lengths) after which some host is not m-good, re-checked from scratch."""
    bad = []
    replay = PartialEmbedding(emb.tree, emb.host)
    for step, v in enumerate(emb.order, start=1):
        replay.place(v, emb.image[v])
        if not all(is_m_good(replay, H, m, D, budget=budget).certified for H in hosts):
            bad.append(step)
    return bad


# ============================================================================
# Stars with prescribed leaf counts
# ============================================================================


@dataclass(frozen=True)
class StarRequest:
    centers: tuple[int, ...]
    demands: tuple[int, ...]

    def __post_init__(self):
        if len(self.centers) != len(self.demands):
            raise ValueError("one demand per centre")
        if any(d < 0 for d in self.demands):
            raise ValueError("demands must be non-negative")


@dataclass(frozen=True)
class HallAssignment:
    leaves: tuple[tuple[int, ...], ...]  # per centre index


@dataclass(frozen=True)
class HallViolator:
    centers: tuple[int, ...]  # indices into the request
    neighbourhood: int
    demand: int


def star_hall_embed(H: BipartiteHost, req: StarRequest) -> HallAssignment | HallViolator:
    """Give centre i exactly d_i private neighbours in part 2, or return a set X of centres with |N(X)| < sum d.

    Augmenting paths over centres with capacities.  When a centre cannot grow, the
    centres reachable by alternating paths have all their neighbours saturated by
    themselves, which is the violator.
    """
    G = H.graph
    nb = [G.adj[c] & H.part2 for c in req.centers]
    owner: dict[int, int] = {}
    load = [0] * len(req.centers)
    for i, d in enumerate(req.demands):
        while load[i] < d:
            reached = {i: None}
            via: dict[int, int] = {}
            queue = deque([i])
            free = None
            while queue and free is None:
                a = queue.popleft()
                for b in iter_bits(nb[a]):
                    if b in via:
                        continue
                    via[b] = a
                    if b not in owner:
                        free = b
                        break
                    a2 = owner[b]
                    if a2 not in reached:
                        reached[a2] = b
                        queue.append(a2)
            if free is None:
                X = tuple(sorted(reached))
                nx = 0
                for a in X:
                    nx |= nb[a]
                return HallViolator(X, popcount(nx), sum(req.demands[a] for a in X))
            b = free
            while True:
                a = via[b]
                prev = reached[a]
                owner[b] = a
                if prev is None:
                    break
                b = prev
            load[i] += 1
    leaves = [[] for _ in req.centers]
    for b, a in owner.items():
        leaves[a].append(b)
    return HallAssignment(tuple(tuple(sorted(ls)) for ls in leaves))


def hall_violations_bruteforce(H: BipartiteHost, req: StarRequest) -> tuple[int, ...] | None:
    """Smallest-first subset scan of the demand-Hall condition (reference for small instances)."""
    from itertools import combinations

    G = H.graph
    nb = [G.adj[c] & H.part2 for c in req.centers]
    idx = range(len(req.centers))
    for s in range(1, len(req.centers) + 1):
        for X in combinations(idx, s):
            nx = 0
            for a in X:
                nx |= nb[a]
            if popcount(nx) < sum(req.demands[a] for a in X):
                return X
    return None


# ============================================================================
# Many leaves
# ============================================================================


@dataclass
class ManyLeavesReport:
    advisory: list[str] = field(default_factory=list)
    samples: int = 0
    removed: tuple[int, int, int] = (0, 0, 0)


def _leaf_class(T: Tree, count: int) -> tuple[list[int], int]:
    leaves = [v for v in T.leaves() if T.n > 1]
    by = {c: [v for v in leaves if T.colour[v] == c] for c in (1, 2)}
    c = 2 if len(by[2]) >= len(by[1]) else 1
    return by[c][:count], c


def _w_accepts(G: Graph, W: int, m1: int, m2: int, budget: int) -> bool:
    """Every m1-set of V(G) has fewer than m2 non-neighbours inside W."""
    verts = bits(G.full_mask)
    adj = G.adj
    counter = _Counter(budget)

    def rec(start, pm, gm, k):
        for i in range(start, len(verts) - (m1 - k) + 1):
            v = verts[i]
            counter.tick()
            pm2, gm2 = pm | (1 << v), gm | adj[v]
            if popcount(W & ~pm2 & ~gm2) < m2:
                continue
            if k + 1 == m1:
                return True
            if rec(i + 1, pm2, gm2, k + 1):
                return True
        return False

    return not rec(0, 0, 0, 0)


def embed_many_leaves(
    G: Graph,
    T: Tree,
    m1: int,
    m2: int,
    D: int,
    seed: int,
    *,
    strict_params: bool = False,
    retry_cap: int = 64,
    budget: int = DEFAULT_BUDGET,
    report: ManyLeavesReport | None = None,
) -> PartialEmbedding:
    """Embed a tree with many leaves: leaf parents go into a well-connected random set W,
    the rest of the tree is placed m-good across three cleaned hosts, and the leaves
    are attached by a demand-Hall matching.
    """
    rep = report if report is not None else ManyLeavesReport()
    n = G.n
    if T.max_degree() > D:
        raise HypothesisBroken(f"tree has max degree {T.max_degree()} > D={D}")
    if 16 * D * m2 > n:
        raise HypothesisBroken(f"16Dm2 = {16 * D * m2} > n = {n}")
    if T.n > n - m1:
        raise HypothesisBroken(f"tree has {T.n} vertices > n - m1 = {n - m1}")
    n_leaves = len(T.leaves())
    if n_leaves < 24 * D * m2:
        raise HypothesisBroken(f"tree has {n_leaves} leaves < 24Dm2 = {24 * D * m2}")
    if not 6 * m1 * math.log(n) < m2:
        msg = f"6 m1 log n = {6 * m1 * math.log(n):.2f} >= m2 = {m2}"
        if strict_params:
            raise HypothesisBroken(msg)
        rep.advisory.append(msg)
    w1 = check_weak(G, m1, max(1, n // (32 * D)), budget=budget)
    if not w1.certified:
        raise HypothesisBroken(f"host is not a weak ({m1},{max(1, n // (32 * D))})-expander: X={w1.X}")
    w2 = check_weak(G, m2, m2, budget=budget)
    if not w2.certified:
        raise HypothesisBroken(f"host is not a weak ({m2},{m2})-expander: X={w2.X}")

    L, _ = _leaf_class(T, 12 * D * m2)
    Lset = set(L)
    rest = [v for v in range(T.n) if v not in Lset]
    root = T.root if T.root not in Lset else rest[0]
    Tp, old = T.induced(rest, root)
    new_of = {o: i for i, o in enumerate(old)}
    parents = sorted({T.parent[v] if T.parent[v] >= 0 else T.children[v][0] for v in L})
    P = {new_of[p] for p in parents}
    side_P = {Tp.depth[v] & 1 for v in P}
    assert len(side_P) == 1
    sp = side_P.pop()
    U1 = sorted(P)
    U2 = [v for v in range(Tp.n) if Tp.depth[v] & 1 == sp and v not in P]
    U3 = [v for v in range(Tp.n) if Tp.depth[v] & 1 != sp]

    rng = np.random.default_rng(seed)
    sizes = [len(U1) + 4 * D * m2, len(U2) + 4 * D * m2, len(U3) + 4 * D * m2]
    if sum(sizes) > n:
        raise HypothesisBroken(f"W sets need {sum(sizes)} > n = {n} vertices")
    W1 = None
    for attempt in range(retry_cap):
        rep.samples = attempt + 1
        cand = mask_of(int(x) for x in rng.choice(n, size=sizes[0], replace=False))
        if _w_accepts(G, cand, m1, m2, budget):
            W1 = cand
            break
    if W1 is None:
        raise SamplingExhausted(f"no acceptable W among {retry_cap} samples")
    others = np.array(bits(G.full_mask & ~W1))
    pick = rng.permutation(others)
    W2 = mask_of(int(x) for x in pick[: sizes[1]])
    W3 = mask_of(int(x) for x in pick[sizes[1] : sizes[1] + sizes[2]])
    cleaned = clean_three_hosts(W1, W2, W3, G, m2, D, budget=budget)
    rep.removed = cleaned.removed

    inner = embed_three_classes(Tp, U1, U2, U3, cleaned.V1, cleaned.V2, cleaned.V3, G, m2, D, budget=budget)

    full = PartialEmbedding(T, G)
    for v in inner.order:
        full.place(old[v], inner.image[v])
    centre_of = {p: [] for p in parents}
    for v in L:
        centre_of[T.parent[v] if T.parent[v] >= 0 else T.children[v][0]].append(v)
    centres = tuple(full.image[p] for p in parents)
    req = StarRequest(centres, tuple(len(centre_of[p]) for p in parents))
    H = BipartiteHost(G, mask_of(centres), G.full_mask & ~full.used)
    res = star_hall_embed(H, req)
    if isinstance(res, HallViolator):
        raise HypothesisBroken(f"leaf matching fails: centres {res.centers} see {res.neighbourhood} < {res.demand}")
    for p, ys in zip(parents, res.leaves):
        for v, y in zip(centre_of[p], ys):
            full.place(v, y)
    problems = validate_embedding(T, G, full.mapping())
    if problems:
        raise InternalAssertion("; ".join(problems[:3]))
    return full


# ============================================================================
# Backtracking embedder
# ============================================================================


def haxell_embed(
    G: Graph,
    T: Tree,
    pin: tuple[int, int] | None = None,
    *,
    within=None,
    budget: int = PLACEMENT_BUDGET,
    certify_m: int | None = None,
    D: int | None = None,
    cert_budget: int = DEFAULT_BUDGET,
) -> PartialEmbedding:
    """Embed T into G[within] by backtracking, optionally mapping tree vertex pin[0] to host vertex pin[1].

    Vertices go in BFS order from the pinned vertex (or the root); candidates are
    tried fewest-free-neighbours first.  Raises NoEmbedding when the search space is
    exhausted and BudgetExhausted when ``budget`` placements were not enough.  With
    ``certify_m`` the small-set conditions are checked first and recorded in
    ``.certified``; when they hold a failure would be a bug.
    """
    W = G.full_mask if within is None else as_mask(within)
    t = T.n
    certified = False
    if certify_m is not None:
        certified = check_haxell(G, certify_m, D if D is not None else T.max_degree(), t, within=W, budget=cert_budget).certified
    if t > popcount(W):
        raise NoEmbedding(f"tree has {t} vertices, host has {popcount(W)}")
    Tr = T.rerooted(pin[0]) if pin is not None else T
    order = Tr.bfs_order
    parent = Tr.parent
    need = [len(Tr.children[v]) for v in range(t)]
    adj = G.adj
    comp_ok = 0
    for comp in G.components(W):
        if popcount(comp) >= t:
            comp_ok |= comp
    if pin is not None:
        if not W >> pin[1] & 1:
            raise ValueError(f"pinned host vertex {pin[1]} is outside the allowed set")
        roots = (1 << pin[1]) & comp_ok
    else:
        roots = comp_ok
    emb = PartialEmbedding(T, G)
    free = W

    def candidates(mask: int, v: int) -> list[int]:
        k = need[v]
        scored = []
        for y in iter_bits(mask):
            deg = popcount(adj[y] & free)
            if deg >= k:
                scored.append((deg, y))
        scored.sort(reverse=True)
        return [y for _, y in scored]

    stack = [candidates(roots, order[0])]
    tried = 0
    while True:
        i = len(emb)
        if i == t:
            break
        if len(stack) == i:
            v = order[i]
            stack.append(candidates(adj[emb.image[parent[v]]] & free, v))
        cands = stack[i]
        if not cands:
            stack.pop()
            if i == 0:
                raise NoEmbedding("search space exhausted")
            free |= 1 << emb.image[order[i - 1]]
            emb.unplace_last()
            continue
        y = cands.pop()
        tried += 1
        if tried > budget:
            raise BudgetExhausted(f"{budget} placements tried without deciding")
        emb.place(order[i], y)
        free &= ~(1 << y)
    emb.certified = certified
    emb.placements = tried
    return emb


def embed_across_edge(G_red: Graph, Vi, Vj, bridge: tuple[int, int], T: Tree, D: int, *, budget: int = PLACEMENT_BUDGET) -> PartialEmbedding:
    """Split T at a balanced edge u1u2 and embed the two sides in G[Vi] and G[Vj] with u1, u2 on the bridge."""
    Vi, Vj = as_mask(Vi), as_mask(Vj)
    v1, v2 = bridge
    if Vi & Vj:
        raise ValueError("Vi and Vj must be disjoint")
    if not (Vi >> v1 & 1 and Vj >> v2 & 1 and G_red.has_edge(v1, v2)):
        raise ValueError("bridge must be an edge from Vi to Vj")
    edge = find_split_edge(T, D)
    side1, side2 = split_sides(T, edge)
    T1, old1 = T.induced(side1, edge.u1)
    T2, old2 = T.induced(side2, edge.u2)
    e1 = haxell_embed(G_red, T1, (old1.index(edge.u1), v1), within=Vi, budget=budget)
    e2 = haxell_embed(G_red, T2, (old2.index(edge.u2), v2), within=Vj, budget=budget)
    mapping = {old1[a]: e1.image[a] for a in range(T1.n)}
    mapping.update({old2[a]: e2.image[a] for a in range(T2.n)})
    full = PartialEmbedding.from_mapping(T, G_red, mapping)
    full.placements = e1.placements + e2.placements
    return full
