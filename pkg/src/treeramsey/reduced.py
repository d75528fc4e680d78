"""Cluster-level structure: matching/triangle decomposition, the X/M/Y/Z structure
of a dense reduced graph, and the assignment of small subtrees to cluster pairs.

Reduced graphs are supplied synthetically (a graph on k clusters with a uniform
capacity); nothing here partitions a host graph into clusters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import networkx as nx

from treeramsey.bits import bits, iter_bits, mask_of, popcount
from treeramsey.errors import CapacityExhausted, DensityTooLow, InternalAssertion
from treeramsey.graph_core import Graph, GnpSpec, sample_gnp


@dataclass(frozen=True)
class ReducedGraph:
    graph: Graph
    capacity: int

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("cluster capacity must be positive")

    @property
    def k(self) -> int:
        return self.graph.n

    @classmethod
    def random(cls, k: int, density: float, capacity: int, seed: int) -> ReducedGraph:
        return cls(sample_gnp(GnpSpec(k, density, seed)), capacity)


# ============================================================================
# Independent set + matching + triangles
# ============================================================================


@dataclass(frozen=True)
class MatTrianDecomposition:
    I: tuple[int, ...]
    M: tuple[tuple[int, int], ...]  # (M1 endpoint, M2 endpoint)
    Gamma: tuple[tuple[int, int, int], ...]

    @property
    def M1(self) -> tuple[int, ...]:
        return tuple(a for a, _ in self.M)

    @property
    def M2(self) -> tuple[int, ...]:
        return tuple(b for _, b in self.M)


def _triangle_packing(F: Graph, within: int) -> list[tuple[int, int, int]]:
    """Greedy vertex-disjoint triangles, lexicographically first."""
    tris, free = [], within
    for a in bits(within):
        if not free >> a & 1:
            continue
        for b in iter_bits(F.adj[a] & free & ~((2 << a) - 1)):
            common = F.adj[a] & F.adj[b] & free & ~((2 << b) - 1)
            if common:
                c = (common & -common).bit_length() - 1
                tris.append((a, b, c))
                free &= ~((1 << a) | (1 << b) | (1 << c))
                break
    return tris


def maximum_matching(F: Graph, within: int) -> list[tuple[int, int]]:
    """Maximum-cardinality matching of F[within] (blossom algorithm from networkx)."""
    g = nx.Graph()
    vs = bits(within)
    g.add_nodes_from(vs)
    g.add_edges_from((u, v) for u in vs for v in iter_bits(F.adj[u] & within) if u < v)
    mate = nx.max_weight_matching(g, maxcardinality=True)
    return sorted((min(u, v), max(u, v)) for u, v in mate)


def mat_trian_decompose(F: Graph) -> MatTrianDecomposition:
    """Partition V(F) into an independent set I, a matching M and disjoint triangles with N(I) inside M1.

    Start from a greedy triangle packing and a maximum matching of the rest, then
    repair two local defects until neither occurs: a leftover vertex adjacent to a
    triangle (release the triangle and re-match), and a leftover vertex adjacent to
    both ends of a matching edge (turn the three into a triangle).  Each repair
    strictly shrinks the leftover set.  Afterwards the matching is maximum on the
    non-triangle part, so no matching edge has both ends adjacent to leftovers.
    """
    full = F.full_mask
    tris = _triangle_packing(F, full)
    while True:
        tri_mask = mask_of(v for t in tris for v in t)
        M = maximum_matching(F, full & ~tri_mask)
        matched = mask_of(v for e in M for v in e)
        I = full & ~tri_mask & ~matched
        hit = None
        for t in tris:
            if any(F.adj[v] & I for v in t):
                hit = ("release", t)
                break
        if hit is None:
            for u, v in M:
                common = F.adj[u] & F.adj[v] & I
                if common:
                    y = (common & -common).bit_length() - 1
                    hit = ("form", tuple(sorted((y, u, v))))
                    break
        if hit is None:
            break
        kind, t = hit
        if kind == "release":
            tris.remove(t)
        else:
            tris.append(t)
    oriented = []
    for u, v in M:
        nu, nv = bool(F.adj[u] & I), bool(F.adj[v] & I)
        if nu and nv:
            raise InternalAssertion(f"both ends of matching edge {u}{v} neighbour the independent set")
        oriented.append((v, u) if nv else (u, v))
    return MatTrianDecomposition(tuple(bits(I)), tuple(oriented), tuple(sorted(tris)))


def check_mat_trian(F: Graph, dec: MatTrianDecomposition) -> list[str]:
    problems = []
    seen: dict[int, str] = {}
    for tag, vs in [("I", dec.I)] + [("M", e) for e in dec.M] + [("T", t) for t in dec.Gamma]:
        for v in vs:
            if v in seen:
                problems.append(f"vertex {v} in two parts")
            seen[v] = tag
    if len(seen) != F.n:
        problems.append("parts do not cover V(F)")
    imask = mask_of(dec.I)
    for v in dec.I:
        if F.adj[v] & imask:
            problems.append(f"I is not independent at {v}")
    for a, b in dec.M:
        if not F.has_edge(a, b):
            problems.append(f"matching pair {a}{b} is not an edge")
    for a, b, c in dec.Gamma:
        if not (F.has_edge(a, b) and F.has_edge(b, c) and F.has_edge(a, c)):
            problems.append(f"{a}{b}{c} is not a triangle")
    m1 = mask_of(dec.M1)
    for v in dec.I:
        if F.adj[v] & ~m1:
            problems.append(f"I-vertex {v} has neighbours outside M1")
    return problems


# ============================================================================
# Structure in a dense reduced graph
# ============================================================================


@dataclass
class ReducedStructure:
    blowup: Graph  # cluster (i, a) is vertex 2i + a - 1
    X: int
    M: tuple[tuple[int, int], ...]
    Y: tuple[int, ...]
    Z: tuple[int, ...]
    k: int
    capacity: int
    rho: float
    delta: float
    trimmed: tuple[int, ...] = ()
    source_cluster: int = -1

    def h_neighbours(self, y: int) -> list[int]:
        return bits(self.blowup.adj[y] & mask_of(self.Z))


def _trim(R: Graph, threshold: float) -> int:
    alive = R.full_mask
    while True:
        low = [v for v in iter_bits(alive) if popcount(R.adj[v] & alive) < threshold]
        if not low:
            return alive
        v = min(low, key=lambda u: (popcount(R.adj[u] & alive), u))
        alive &= ~(1 << v)


def find_structure(R: ReducedGraph, rho: float, delta: float) -> ReducedStructure:
    """Cluster X, matching M and bipartite H = R[Y, Z] in the 2-blow-up of the trimmed reduced graph."""
    G, k = R.graph, R.k
    need = (rho + delta / 3) * k * k / 2
    if G.edge_count() < need:
        raise DensityTooLow(f"e(R) = {G.edge_count()} < (rho + delta/3) k^2/2 = {need:.1f}")
    alive = _trim(G, (rho + delta / 3) * k / 2)
    R0 = G.restrict(alive)
    xp = max(iter_bits(alive), key=lambda v: (popcount(R0.adj[v]), -v))
    nbr = bits(R0.adj[xp])
    index = {v: i for i, v in enumerate(nbr)}
    F = Graph(len(nbr), [mask_of(index[u] for u in iter_bits(R0.adj[v] & R0.adj[xp])) for v in nbr])
    dec = mat_trian_decompose(F)

    def c(v, a):
        return 2 * v + a - 1

    blow = [0] * (2 * k)
    for u, v in R0.edges():
        for a in (1, 2):
            for b in (1, 2):
                blow[c(u, a)] |= 1 << c(v, b)
                blow[c(v, b)] |= 1 << c(u, a)
    B = Graph(2 * k, blow)
    M = []
    for a, b in dec.M:
        u, v = nbr[a], nbr[b]
        M += [(c(u, 1), c(v, 1)), (c(u, 2), c(v, 2))]
    for a, b, cc in dec.Gamma:
        u, v, w = nbr[a], nbr[b], nbr[cc]
        M += [(c(u, 1), c(v, 1)), (c(u, 2), c(w, 1)), (c(v, 2), c(w, 2))]
    Y = tuple(sorted(c(nbr[i], a) for i in dec.I for a in (1, 2)))
    X = c(xp, 1)
    ymask = mask_of(Y)
    zmask = B.gamma(ymask) & ~(1 << X) & ~B.adj[X]
    return ReducedStructure(
        blowup=B,
        X=X,
        M=tuple(M),
        Y=Y,
        Z=tuple(bits(zmask)),
        k=2 * k,
        capacity=R.capacity // 2,
        rho=rho,
        delta=delta,
        trimmed=tuple(bits(G.full_mask & ~alive)),
        source_cluster=xp,
    )


def validate_structure(S: ReducedStructure) -> list[str]:
    """Recompute conditions (a)-(c) and the basic shape of M, Y, Z from the blow-up."""
    B = S.blowup
    problems = []
    vm = [v for e in S.M for v in e]
    vm_mask = mask_of(vm)
    if len(set(vm)) != len(vm):
        problems.append("M is not a matching")
    for u, v in S.M:
        if not B.has_edge(u, v):
            problems.append(f"M pair {u},{v} is not an edge")
    ymask = mask_of(S.Y)
    if B.adj[S.X] != vm_mask | ymask or vm_mask & ymask:
        problems.append("(a) N(X) is not the disjoint union of V(M) and Y")
    if len(vm) + len(S.Y) < (S.rho + S.delta / 3) * S.k:
        problems.append(f"(b) |V(M)| + |Y| = {len(vm) + len(S.Y)} < {(S.rho + S.delta / 3) * S.k:.2f}")
    if B.e_within(ymask):
        problems.append("Y is not independent")
    zmask = mask_of(S.Z)
    if zmask != B.gamma(ymask) & ~(1 << S.X) & ~B.adj[S.X]:
        problems.append("Z differs from N(Y) minus X and N(X)")
    bound = (S.rho + S.delta / 4) * S.k / 2 - len(vm) / 2
    for y in S.Y:
        d = popcount(B.adj[y] & zmask)
        if d < bound:
            problems.append(f"(c) cluster {y} has {d} < {bound:.2f} neighbours in Z")
    return problems


# ============================================================================
# Assigning subtrees to cluster pairs
# ============================================================================


@dataclass(frozen=True)
class Reservation:
    step: int
    subtree: int
    cls: int
    cluster: int
    offset: int
    size: int
    kind: str  # "H" or "M"


@dataclass
class AssignmentPlan:
    reservations: list[Reservation]
    capacity: int
    margin: int
    balance_bound: float
    stage1_threshold: float
    stage1_total: int
    stage1_steps: int
    notes: list[str] = field(default_factory=list)

    def occupancy(self, upto_step: int | None = None) -> dict[int, int]:
        occ: dict[int, int] = {}
        for r in self.reservations:
            if upto_step is None or r.step <= upto_step:
                occ[r.cluster] = occ.get(r.cluster, 0) + r.size
        return occ

    def targets(self) -> dict[int, tuple[int, int, str]]:
        out: dict[int, list] = {}
        for r in self.reservations:
            t = out.setdefault(r.subtree, [None, None, r.kind])
            t[r.cls - 1] = r.cluster
        return {i: tuple(v) for i, v in out.items()}

    def to_text(self) -> str:
        lines = [
            f"p plan {len(self.reservations)} {self.capacity} {self.margin}",
            f"c balance {self.balance_bound!r} stage1 {self.stage1_threshold!r} {self.stage1_total} {self.stage1_steps}",
        ]
        lines += [f"{r.step} {r.subtree} {r.cls} {r.cluster} {r.offset} {r.size} {r.kind}" for r in self.reservations]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> AssignmentPlan:
        res, head, extra = [], None, None
        for ln in text.splitlines():
            p = ln.split()
            if not p or p[0].startswith("#"):
                continue
            if p[0] == "p":
                head = p
            elif p[0] == "c" and p[1] == "balance":
                extra = p
            elif p[0] != "c":
                res.append(Reservation(*map(int, p[:6]), p[6]))
        if head is None or extra is None:
            raise ValueError("missing plan header")
        return cls(res, int(head[3]), int(head[4]), float(extra[2]), float(extra[4]), int(extra[5]), int(extra[6]))


def assign_subtrees(
    sizes,
    S: ReducedStructure,
    eps: float,
    beta: float,
    D: int,
    rho: float,
    n: int,
    *,
    delta: float | None = None,
    cap_mode: str = "bound",
) -> AssignmentPlan:
    """Reserve disjoint intervals |T_ij| + 16 D eps m inside cluster pairs for every subtree.

    Subtrees are taken by decreasing class-2 surplus.  Stage 1 fills edges of H
    (class 2 into Y) until the assigned trees reach (1 - delta/16) Q m; stage 2
    puts the larger class of each remaining tree on the less-occupied end of the
    first matching edge with room, which keeps every matching edge balanced.
    ``cap_mode="observed"`` replaces the D^4-beta size bounds by the largest
    actual subtree.
    """
    delta = S.delta if delta is None else delta
    m = S.capacity
    margin = math.ceil(16 * D * eps * m)
    sizes = [tuple(s) for s in sizes]
    if cap_mode == "bound":
        big_h = D**4 * beta * n
        big_m = D**4 * beta * rho * n
    elif cap_mode == "observed":
        big_h = big_m = max((a + b for a, b in sizes), default=0)
    else:
        raise ValueError(f"unknown cap_mode {cap_mode!r}")
    notes = []
    largest = max((a + b for a, b in sizes), default=0)
    if largest > big_m:
        notes.append(f"largest subtree {largest} exceeds the size bound {big_m:.2f}")
    slack = len(sizes) * 16 * D * eps * m + S.k * (big_h + 16 * D * eps * m)
    if slack > delta**2 / 256 * S.k * m:
        notes.append(f"accounting slack {slack:.1f} exceeds delta^2 k m / 256 = {delta**2 / 256 * S.k * m:.1f}")
    sigma = sorted(range(len(sizes)), key=lambda i: (-(sizes[i][1] - sizes[i][0]), i))
    used: dict[int, int] = {}
    res: list[Reservation] = []
    vm = len(S.M) * 2
    Q = (S.rho + delta / 4) * S.k - vm
    threshold = (1 - delta / 16) * Q * m
    zmask = mask_of(S.Z)
    step = 0
    total = 0
    pos = 0

    def reserve(i, cls, cluster, kind):
        size = sizes[i][cls - 1] + margin
        res.append(Reservation(step, i, cls, cluster, used.get(cluster, 0), size, kind))
        used[cluster] = used.get(cluster, 0) + size

    if Q > 0:
        room_h = m - (big_h + margin)
        while pos < len(sigma) and total < threshold:
            i = sigma[pos]
            pair = None
            for y in S.Y:
                if used.get(y, 0) > room_h:
                    continue
                for z in iter_bits(S.blowup.adj[y] & zmask):
                    if used.get(z, 0) <= room_h:
                        pair = (y, z)
                        break
                if pair:
                    break
            if pair is None:
                if total < threshold:
                    notes.append(f"stage 1 ran out of room at {total} < {threshold:.1f}")
                break
            step += 1
            reserve(i, 2, pair[0], "H")
            reserve(i, 1, pair[1], "H")
            total += sum(sizes[i])
            pos += 1
    stage1_steps = step
    room_m = m - (big_m + margin)
    while pos < len(sigma):
        i = sigma[pos]
        edge = None
        for a, b in S.M:
            if max(used.get(a, 0), used.get(b, 0)) <= room_m:
                edge = (a, b)
                break
        if edge is None:
            plan = AssignmentPlan(res, m, margin, big_m, threshold, total, stage1_steps, notes)
            raise CapacityExhausted(f"no matching edge has room for subtree {i} (step {step + 1})", plan)
        a, b = edge
        low, high = (a, b) if used.get(a, 0) <= used.get(b, 0) else (b, a)
        jstar = 2 if sizes[i][1] >= sizes[i][0] else 1
        step += 1
        reserve(i, jstar, low, "M")
        reserve(i, 3 - jstar, high, "M")
        pos += 1
    return AssignmentPlan(res, m, margin, big_m, threshold, total, stage1_steps, notes)


def validate_plan(plan: AssignmentPlan, S: ReducedStructure, sizes) -> list[str]:
    """Replay the ledger: disjoint in-capacity intervals, exact sizes, H/M targets, balance after every step."""
    problems = []
    sizes = [tuple(s) for s in sizes]
    by_cluster: dict[int, list[tuple[int, int]]] = {}
    for r in plan.reservations:
        by_cluster.setdefault(r.cluster, []).append((r.offset, r.offset + r.size))
    for c, ivs in by_cluster.items():
        ivs.sort()
        for (a0, a1), (b0, _) in zip(ivs, ivs[1:]):
            if b0 < a1:
                problems.append(f"(A) overlapping reservations in cluster {c}")
        if ivs and (ivs[0][0] < 0 or ivs[-1][1] > plan.capacity):
            problems.append(f"(A) cluster {c} reservations leave [0, {plan.capacity})")
    per_tree: dict[int, dict[int, Reservation]] = {}
    for r in plan.reservations:
        if r.cls in per_tree.setdefault(r.subtree, {}):
            problems.append(f"subtree {r.subtree} class {r.cls} reserved twice")
        per_tree[r.subtree][r.cls] = r
        if not 0 <= r.subtree < len(sizes):
            problems.append(f"unknown subtree {r.subtree}")
            continue
        if r.size != sizes[r.subtree][r.cls - 1] + plan.margin:
            problems.append(f"(B) subtree {r.subtree} class {r.cls} reserved {r.size} != {sizes[r.subtree][r.cls - 1] + plan.margin}")
    if set(per_tree) != set(range(len(sizes))):
        problems.append(f"{len(sizes) - len(per_tree)} subtrees unassigned")
    Ymask, Zmask = mask_of(S.Y), mask_of(S.Z)
    medges = {frozenset(e) for e in S.M}
    for i, rs in per_tree.items():
        if set(rs) != {1, 2}:
            problems.append(f"subtree {i} lacks a class")
            continue
        c1, c2 = rs[1].cluster, rs[2].cluster
        if rs[1].kind == "H":
            if not (Ymask >> c2 & 1 and Zmask >> c1 & 1 and S.blowup.has_edge(c1, c2)):
                problems.append(f"(C) subtree {i} on H-pair ({c1},{c2}) without class 2 in Y")
        elif frozenset((c1, c2)) not in medges:
            problems.append(f"subtree {i} on ({c1},{c2}) which is not a matching edge")
    occ: dict[int, int] = {}
    for step in sorted({r.step for r in plan.reservations}):
        for r in plan.reservations:
            if r.step == step:
                occ[r.cluster] = occ.get(r.cluster, 0) + r.size
        for a, b in S.M:
            gap = abs(occ.get(a, 0) - occ.get(b, 0))
            if gap > plan.balance_bound:
                problems.append(f"balance broken on ({a},{b}) after step {step}: {gap} > {plan.balance_bound:.2f}")
    return problems
