"""Certification and extraction of expansion properties.

Vertex sets are bitmasks; every check takes an optional ``within`` mask and works
on the induced subgraph without copying.  Exhaustive searches visit subsets in
increasing size and lexicographic order, pruning branches that provably contain
no violator, so the first violation reported is the smallest one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from treeramsey.bits import bits, first_k, iter_bits, mask_of, popcount
from treeramsey.errors import BudgetExceeded, CleaningDiverged, PreconditionBroken
from treeramsey.graph_core import Graph, codegree_stats

DEFAULT_BUDGET = 5_000_000


def as_mask(vertices) -> int:
    return vertices if isinstance(vertices, int) else mask_of(vertices)


@dataclass(frozen=True)
class ExpansionParams:
    m1: int
    m2: int
    D: int

    def __post_init__(self):
        if self.m1 < 1 or self.m2 < 1:
            raise ValueError("m1 and m2 must be positive")


@dataclass(frozen=True)
class ExpansionVerdict:
    kind: str  # Certified | SmallSetViolation | WeakPairViolation | Inconclusive
    mode: str = "exhaustive"
    X: tuple[int, ...] = ()
    Y: tuple[int, ...] = ()
    observed: int | None = None
    side: int | None = None
    params: tuple[tuple[str, int], ...] = ()

    @property
    def certified(self) -> bool:
        return self.kind == "Certified"

    @property
    def violation(self) -> bool:
        return self.kind in ("SmallSetViolation", "WeakPairViolation")

    def to_text(self) -> str:
        lines = [f"verdict {self.kind}", f"mode {self.mode}"]
        lines += [f"param {k} {v}" for k, v in self.params]
        if self.side is not None:
            lines.append(f"side {self.side}")
        if self.X:
            lines.append("X " + " ".join(map(str, self.X)))
        if self.Y:
            lines.append("Y " + " ".join(map(str, self.Y)))
        if self.observed is not None:
            lines.append(f"observed {self.observed}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> ExpansionVerdict:
        kw: dict = {"params": []}
        for ln in text.splitlines():
            parts = ln.split()
            if not parts:
                continue
            key, rest = parts[0], parts[1:]
            if key == "verdict":
                kw["kind"] = rest[0]
            elif key == "mode":
                kw["mode"] = rest[0]
            elif key == "param":
                kw["params"].append((rest[0], int(rest[1])))
            elif key == "side":
                kw["side"] = int(rest[0])
            elif key in ("X", "Y"):
                kw[key] = tuple(int(x) for x in rest)
            elif key == "observed":
                kw["observed"] = int(rest[0])
        kw["params"] = tuple(kw["params"])
        return cls(**kw)


class _Counter:
    __slots__ = ("left",)

    def __init__(self, budget: int):
        self.left = budget

    def tick(self):
        self.left -= 1
        if self.left < 0:
            raise BudgetExceeded("subset enumeration budget exhausted")


# ============================================================================
# Weak expansion: every m1-set has fewer than m2 non-neighbours
# ============================================================================


def _weak_violation(G: Graph, within: int, m1: int, m2: int, counter: _Counter):
    verts = bits(within)
    adj = G.adj

    def rec(start, pmask, gmask, k):
        for i in range(start, len(verts) - (m1 - k) + 1):
            v = verts[i]
            counter.tick()
            pm, gm = pmask | (1 << v), gmask | adj[v]
            non = within & ~pm & ~gm
            if popcount(non) < m2:
                continue  # supersets only lose non-neighbours
            if k + 1 == m1:
                return pm, non
            found = rec(i + 1, pm, gm, k + 1)
            if found:
                return found
        return None

    return rec(0, 0, 0, 0)


def check_weak(
    G: Graph,
    m1: int,
    m2: int,
    *,
    within=None,
    budget: int = DEFAULT_BUDGET,
    mode: str = "exhaustive",
    samples: int = 10_000,
    seed: int = 0,
) -> ExpansionVerdict:
    """Weak (m1,m2)-expansion: Certified iff every m1-set X has < m2 vertices outside X and N(X).

    ``mode="heuristic"`` samples m1-sets and can only report violations; ``"auto"``
    falls back to it when the exhaustive budget runs out.
    """
    within = G.full_mask if within is None else as_mask(within)
    params = (("m1", m1), ("m2", m2))
    if popcount(within) < m1:
        return ExpansionVerdict("Certified", "exhaustive", params=params)
    if mode in ("exhaustive", "auto"):
        try:
            found = _weak_violation(G, within, m1, m2, _Counter(budget))
        except BudgetExceeded:
            if mode == "exhaustive":
                raise
        else:
            if found is None:
                return ExpansionVerdict("Certified", "exhaustive", params=params)
            xm, non = found
            return ExpansionVerdict("WeakPairViolation", "exhaustive", tuple(bits(xm)), tuple(first_k(non, m2)), params=params)
    rng = np.random.default_rng(seed)
    verts = np.array(bits(within))
    for _ in range(samples):
        xm = mask_of(int(v) for v in rng.choice(verts, size=m1, replace=False))
        non = within & ~xm & ~G.gamma(xm)
        if popcount(non) >= m2:
            return ExpansionVerdict("WeakPairViolation", "heuristic", tuple(bits(xm)), tuple(first_k(non, m2)), params=params)
    return ExpansionVerdict("Inconclusive", "heuristic", params=params)


# ============================================================================
# Small-set expansion
# ============================================================================


def _small_set_violation(G: Graph, side: int, target: int, size: int, need, counter: _Counter, exclude_self: bool):
    """First X of the given size inside ``side`` with |N(X) & target| < need(size).

    With ``exclude_self`` the neighbourhood excludes X itself (non-bipartite case),
    so adding s-k more vertices can remove at most s-k neighbours from a prefix.
    """
    verts = bits(side)
    adj = G.adj
    bound = need(size)

    def rec(start, pmask, gmask, k):
        for i in range(start, len(verts) - (size - k) + 1):
            v = verts[i]
            counter.tick()
            pm, gm = pmask | (1 << v), gmask | adj[v]
            nb = gm & target & ~pm if exclude_self else gm & target
            cnt = popcount(nb)
            slack = (size - k - 1) if exclude_self else 0
            if cnt - slack >= bound:
                continue
            if k + 1 == size:
                return pm, cnt
            found = rec(i + 1, pm, gm, k + 1)
            if found:
                return found
        return None

    return rec(0, 0, 0, 0)


def check_strong(G: Graph, m1: int, D: int, *, within=None, budget: int = DEFAULT_BUDGET) -> ExpansionVerdict:
    """Property (i): |N(X)| >= D|X|+1 for 1 <= |X| <= m1; returns the smallest violator."""
    within = G.full_mask if within is None else as_mask(within)
    counter = _Counter(budget)
    params = (("m1", m1), ("D", D))
    for s in range(1, min(m1, popcount(within)) + 1):
        found = _small_set_violation(G, within, within, s, lambda k: D * k + 1, counter, True)
        if found:
            xm, cnt = found
            return ExpansionVerdict("SmallSetViolation", "exhaustive", tuple(bits(xm)), observed=cnt, params=params)
    return ExpansionVerdict("Certified", "exhaustive", params=params)


def check_expander(G: Graph, m1: int, m2: int, D: int, *, within=None, budget: int = DEFAULT_BUDGET) -> ExpansionVerdict:
    """Full (m1,m2,D)-expander check: small-set property first, then the pair property."""
    v = check_strong(G, m1, D, within=within, budget=budget)
    if not v.certified:
        return v
    w = check_weak(G, m1, m2, within=within, budget=budget)
    return ExpansionVerdict(w.kind, w.mode, w.X, w.Y, w.observed, params=(("m1", m1), ("m2", m2), ("D", D)))


def check_haxell(G: Graph, m: int, D: int, t: int, *, within=None, budget: int = DEFAULT_BUDGET) -> ExpansionVerdict:
    """Both tree-universality conditions for trees on t vertices.

    (1) |N(X)| >= D|X|+1 for |X| <= m; (2) |N(X)| >= t+D|X|+1 for m < |X| <= 2m.
    (2) is phrased through non-neighbours: |N(X)| = |V| - |X| - |non(X)|, and
    non(X) only shrinks as X grows, so a prefix whose non-neighbourhood already
    fits the tightest budget (|X| = 2m) is pruned with all its supersets.
    """
    within = G.full_mask if within is None else as_mask(within)
    params = (("m", m), ("D", D), ("t", t))
    v = check_strong(G, m, D, within=within, budget=budget)
    if not v.certified:
        return ExpansionVerdict(v.kind, v.mode, v.X, observed=v.observed, side=1, params=params)
    size = popcount(within)
    verts = bits(within)
    adj = G.adj
    counter = _Counter(budget)
    top = min(2 * m, size)

    def allowed(s):  # max non-neighbours for a set of size s
        return size - (D + 1) * s - t - 1

    def rec(start, pmask, gmask, k):
        for i in range(start, len(verts)):
            v = verts[i]
            counter.tick()
            pm, gm = pmask | (1 << v), gmask | adj[v]
            non = popcount(within & ~pm & ~gm)
            if non <= allowed(top):
                continue
            if k + 1 > m and non > allowed(k + 1):
                return pm, size - (k + 1) - non
            if k + 1 < top:
                found = rec(i + 1, pm, gm, k + 1)
                if found:
                    return found
        return None

    if top > m:
        found = rec(0, 0, 0, 0)
        if found:
            xm, nb = found
            return ExpansionVerdict("SmallSetViolation", "exhaustive", tuple(bits(xm)), observed=nb, side=2, params=params)
    return ExpansionVerdict("Certified", "exhaustive", params=params)


@dataclass(frozen=True)
class Extraction:
    kept: tuple[int, ...]
    removed: tuple[int, ...]

    @property
    def kept_mask(self) -> int:
        return mask_of(self.kept)


def extract_expander(
    G: Graph, m1: int, m2: int, D: int, *, within=None, budget: int = DEFAULT_BUDGET, verify: bool = True
) -> Extraction:
    """Remove a set Z of at most m1 vertices so that the rest is an (m1,m2,D)-expander.

    Z is grown by absorbing smallest violators of the small-set property in the
    current remainder.  A union of such sets again has |N| <= D|.|, so if Z ever
    outgrew m1 the input could not be a weak (m1,m2)-expander on
    >= m2 + (2D+2)m1 vertices.
    """
    V = G.full_mask if within is None else as_mask(within)
    if popcount(V) < m2 + (2 * D + 2) * m1:
        raise PreconditionBroken(f"|V|={popcount(V)} < m2+(2D+2)m1 = {m2 + (2 * D + 2) * m1}")
    Z = 0
    while True:
        v = check_strong(G, m1, D, within=V & ~Z, budget=budget)
        if v.certified:
            break
        Z |= mask_of(v.X)
        if popcount(Z) > m1:
            raise PreconditionBroken(f"violating union reached {popcount(Z)} > m1={m1} vertices")
    kept = V & ~Z
    if verify:
        w = check_weak(G, m1, m2, within=kept, budget=budget)
        if not w.certified:
            raise PreconditionBroken(f"remainder is not a weak ({m1},{m2})-expander: X={w.X}")
    return Extraction(tuple(bits(kept)), tuple(bits(Z)))


# ============================================================================
# Bipartite hosts
# ============================================================================


@dataclass(frozen=True)
class BipartiteHost:
    graph: Graph
    part1: int
    part2: int

    def __post_init__(self):
        if self.part1 & self.part2:
            raise ValueError("parts must be disjoint")

    @classmethod
    def of(cls, graph: Graph, part1, part2) -> BipartiteHost:
        return cls(graph, as_mask(part1), as_mask(part2))

    def other(self, side: int) -> int:
        return self.part2 if side == 1 else self.part1

    def part(self, side: int) -> int:
        return self.part1 if side == 1 else self.part2

    def side_of(self, v: int) -> int:
        if self.part1 >> v & 1:
            return 1
        if self.part2 >> v & 1:
            return 2
        return 0

    def neighbours(self, v: int) -> int:
        side = self.side_of(v)
        return self.graph.adj[v] & self.other(side) if side else 0


def check_bip_expander(H: BipartiteHost, m: int, D: int, *, budget: int = DEFAULT_BUDGET) -> ExpansionVerdict:
    """(1) |N_H(X)| >= D|X| for X inside one part with |X| <= m; (2) every pair of m-sets across spans an edge."""
    counter = _Counter(budget)
    params = (("m", m), ("D", D))
    G = H.graph
    for side in (1, 2):
        for s in range(1, min(m, popcount(H.part(side))) + 1):
            found = _small_set_violation(G, H.part(side), H.other(side), s, lambda k: D * k, counter, False)
            if found:
                xm, cnt = found
                return ExpansionVerdict("SmallSetViolation", "exhaustive", tuple(bits(xm)), observed=cnt, side=side, params=params)
    if popcount(H.part1) >= m and popcount(H.part2) >= m:
        found = _weak_violation_across(G, H.part1, H.part2, m, counter)
        if found:
            xm, non = found
            return ExpansionVerdict("WeakPairViolation", "exhaustive", tuple(bits(xm)), tuple(first_k(non, m)), side=1, params=params)
    return ExpansionVerdict("Certified", "exhaustive", params=params)


def _weak_violation_across(G: Graph, side: int, target: int, m: int, counter: _Counter):
    """First m-set X in ``side`` with at least m non-neighbours in ``target``."""
    verts = bits(side)
    adj = G.adj

    def rec(start, pmask, gmask, k):
        for i in range(start, len(verts) - (m - k) + 1):
            v = verts[i]
            counter.tick()
            pm, gm = pmask | (1 << v), gmask | adj[v]
            non = target & ~gm
            if popcount(non) < m:
                continue
            if k + 1 == m:
                return pm, non
            found = rec(i + 1, pm, gm, k + 1)
            if found:
                return found
        return None

    return rec(0, 0, 0, 0)


@dataclass(frozen=True)
class CleanedHosts:
    V1: int
    V2: int
    V3: int
    removed: tuple[int, int, int]  # |W_i \ V_i|

    def hosts(self, G: Graph) -> tuple[BipartiteHost, BipartiteHost, BipartiteHost]:
        return (
            BipartiteHost(G, self.V1, self.V3),
            BipartiteHost(G, self.V2, self.V3),
            BipartiteHost(G, self.V1 | self.V2, self.V3),
        )


def clean_three_hosts(W1, W2, W3, G: Graph, m2: int, D: int, *, budget: int = DEFAULT_BUDGET, certify: bool = True) -> CleanedHosts:
    """Strip small poorly-expanding sets until G[V1,V3], G[V2,V3], G[V1+V2,V3] are bipartite (m2,D)-expanders."""
    W = [as_mask(W1), as_mask(W2), as_mask(W3)]
    if W[0] & W[1] or W[0] & W[2] or W[1] & W[2]:
        raise ValueError("W1, W2, W3 must be disjoint")
    V = list(W)
    counter = _Counter(budget)

    def next_violator():
        for s in range(1, m2 + 1):
            for target in (V[0], V[1]):
                if popcount(V[2]) >= s:
                    found = _small_set_violation(G, V[2], target, s, lambda k: D * k, counter, False)
                    if found:
                        return 2, found[0]
            if popcount(V[0] | V[1]) >= s:
                found = _small_set_violation(G, V[0] | V[1], V[2], s, lambda k: D * k, counter, False)
                if found:
                    return 0, found[0]
        return None

    while (hit := next_violator()) is not None:
        where, xm = hit
        if where == 2:
            V[2] &= ~xm
        else:
            V[0] &= ~xm
            V[1] &= ~xm
        for i in range(3):
            if popcount(W[i] & ~V[i]) > 2 * m2:
                raise CleaningDiverged(f"side {i + 1} lost {popcount(W[i] & ~V[i])} > 2*m2 = {2 * m2} vertices")
    out = CleanedHosts(V[0], V[1], V[2], tuple(popcount(W[i] & ~V[i]) for i in range(3)))
    if certify:
        for idx, H in enumerate(out.hosts(G)):
            v = check_bip_expander(H, m2, D, budget=budget)
            if not v.certified:
                raise PreconditionBroken(f"host {idx} is not a bipartite ({m2},{D})-expander after cleaning: {v.kind} X={v.X}")
    return out


# ============================================================================
# Inclusion-exclusion expansion bound under a codegree cap
# ============================================================================


@dataclass
class CodegreeBoundReport:
    applicable: bool
    min_degree: int
    max_codegree: int
    gamma_prime: float | None = None
    verified_max_size: int = 0
    violation: tuple[int, ...] | None = None
    reason: str = ""

    @property
    def holds(self) -> bool:
        return self.applicable and self.violation is None


def codegree_expansion_bound(
    G: Graph, gamma: float, p: float, C: float, *, size_cap: int = 3, budget: int = DEFAULT_BUDGET
) -> CodegreeBoundReport:
    """Derive gamma' from min-degree/codegree bounds and verify |N(X)| >= gamma'*p*N*|X|/log N exhaustively.

    For |X| = x and any X' in X of size s, Bonferroni gives
    |N(X)| >= gamma*p*N*s - s^2 * 2p^2 N log N - x.  gamma' is the worst case over
    x <= C/p of the best such s, with s <= max(1, gamma/(4p log N)).
    """
    N = G.n
    stats = codegree_stats(G)
    logn = math.log(N)
    report = CodegreeBoundReport(False, stats.min_degree, stats.max_codegree)
    if stats.min_degree < gamma * p * N:
        report.reason = f"min degree {stats.min_degree} < gamma*p*N = {gamma * p * N:g}"
        return report
    if stats.max_codegree > 2 * p * p * N * logn:
        report.reason = f"max codegree {stats.max_codegree} > 2p^2 N log N = {2 * p * p * N * logn:g}"
        return report
    report.applicable = True
    s_cap = max(1, math.floor(gamma / (4 * p * logn)))
    x_max = max(1, math.floor(C / p))
    gp = math.inf
    for x in range(1, x_max + 1):
        best = max(gamma * p * N * s - s * s * 2 * p * p * N * logn - x for s in range(1, min(s_cap, x) + 1))
        gp = min(gp, best * logn / (p * N * x))
    report.gamma_prime = gp
    top = min(x_max, size_cap, N)
    total = sum(math.comb(N, s) for s in range(1, top + 1))
    if total > budget:
        raise BudgetExceeded(f"{total} subsets exceed the budget of {budget}")
    counter = _Counter(budget)
    for s in range(1, top + 1):
        need = lambda k: gp * p * N * k / logn  # noqa: E731
        found = _small_set_violation(G, G.full_mask, G.full_mask, s, need, counter, True)
        if found:
            report.violation = tuple(bits(found[0]))
            return report
        report.verified_max_size = s
    return report


def non_neighbour_count(G: Graph, xmask: int, within: int) -> int:
    return popcount(within & ~xmask & ~G.gamma(xmask))


def iter_small_sets(mask: int, max_size: int):
    """All nonempty subsets of ``mask`` with size <= max_size, smallest first (test helper)."""
    from itertools import combinations

    verts = bits(mask)
    for s in range(1, max_size + 1):
        yield from combinations(verts, s)


__all__ = [
    "BipartiteHost",
    "CleanedHosts",
    "CodegreeBoundReport",
    "ExpansionParams",
    "ExpansionVerdict",
    "Extraction",
    "as_mask",
    "check_bip_expander",
    "check_expander",
    "check_haxell",
    "check_strong",
    "check_weak",
    "clean_three_hosts",
    "codegree_expansion_bound",
    "extract_expander",
    "iter_bits",
]
