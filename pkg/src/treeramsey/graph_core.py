"""Graphs as bitset adjacency rows, seeded G(N,p) sampling, and random-graph diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from pathlib import Path

import numpy as np

from treeramsey.bits import iter_bits, mask_of, popcount
from treeramsey.errors import BudgetExceeded, CapExceeded

VERTEX_CAP = 5000
_M64 = (1 << 64) - 1


class Graph:
    """Undirected simple graph on vertices ``0..n-1``; ``adj[v]`` is a neighbour bitmask."""

    __slots__ = ("n", "adj")

    def __init__(self, n: int, adj, *, check: bool = True, cap: int = VERTEX_CAP):
        if n < 0:
            raise ValueError("vertex count must be non-negative")
        if n > cap:
            raise CapExceeded(f"{n} vertices exceeds the cap of {cap}")
        adj = tuple(adj)
        if len(adj) != n:
            raise ValueError("adjacency length differs from vertex count")
        if check:
            full = (1 << n) - 1
            for v, row in enumerate(adj):
                if row >> v & 1:
                    raise ValueError(f"self-loop at {v}")
                if row & ~full:
                    raise ValueError(f"neighbour of {v} out of range")
                for u in iter_bits(row):
                    if not adj[u] >> v & 1:
                        raise ValueError(f"asymmetric adjacency {v}->{u}")
        self.n = n
        self.adj = adj

    @classmethod
    def from_edges(cls, n: int, edges, **kw) -> Graph:
        rows = [0] * n
        for u, v in edges:
            if u == v:
                raise ValueError(f"self-loop at {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u},{v}) out of range")
            rows[u] |= 1 << v
            rows[v] |= 1 << u
        return cls(n, rows, check=False, **kw)

    @classmethod
    def complete(cls, n: int) -> Graph:
        full = (1 << n) - 1
        return cls(n, [full ^ (1 << v) for v in range(n)], check=False)

    @classmethod
    def empty(cls, n: int) -> Graph:
        return cls(n, [0] * n, check=False)

    @property
    def full_mask(self) -> int:
        return (1 << self.n) - 1

    def neighbours(self, v: int) -> int:
        return self.adj[v]

    def has_edge(self, u: int, v: int) -> bool:
        return bool(self.adj[u] >> v & 1)

    def degree(self, v: int, within: int | None = None) -> int:
        row = self.adj[v]
        return popcount(row if within is None else row & within)

    def edges(self) -> list[tuple[int, int]]:
        out = []
        for u in range(self.n):
            for v in iter_bits(self.adj[u] >> (u + 1)):
                out.append((u, u + 1 + v))
        return out

    def edge_count(self) -> int:
        return sum(popcount(r) for r in self.adj) // 2

    def gamma(self, xmask: int) -> int:
        """Union of neighbourhoods of the vertices in ``xmask``."""
        g = 0
        for x in iter_bits(xmask):
            g |= self.adj[x]
        return g

    def ext_neighbourhood(self, xmask: int, within: int | None = None) -> int:
        """N(X) = Gamma(X) minus X, optionally intersected with ``within``."""
        g = self.gamma(xmask) & ~xmask
        return g if within is None else g & within

    def e_between(self, amask: int, bmask: int) -> int:
        """Edges with one end in A and the other in B (A, B disjoint)."""
        return sum(popcount(self.adj[a] & bmask) for a in iter_bits(amask))

    def e_within(self, amask: int) -> int:
        return sum(popcount(self.adj[a] & amask) for a in iter_bits(amask)) // 2

    def restrict(self, within: int) -> Graph:
        """Spanning subgraph keeping only edges inside ``within``; labels unchanged."""
        return Graph(self.n, [(self.adj[v] & within) if within >> v & 1 else 0 for v in range(self.n)], check=False)

    def complement(self) -> Graph:
        full = self.full_mask
        return Graph(self.n, [full & ~self.adj[v] & ~(1 << v) for v in range(self.n)], check=False)

    def components(self, within: int | None = None) -> list[int]:
        todo = self.full_mask if within is None else within
        comps = []
        while todo:
            seed = todo & -todo
            comp = seed
            frontier = seed
            while frontier:
                nxt = 0
                for v in iter_bits(frontier):
                    nxt |= self.adj[v]
                nxt &= todo & ~comp
                comp |= nxt
                frontier = nxt
            comps.append(comp)
            todo &= ~comp
        return comps

    def __eq__(self, other) -> bool:
        return isinstance(other, Graph) and self.n == other.n and self.adj == other.adj

    def __hash__(self) -> int:
        return hash((self.n, self.adj))

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, m={self.edge_count()})"

    def to_text(self) -> str:
        edges = self.edges()
        lines = [f"p graph {self.n} {len(edges)}"]
        lines.extend(f"{u} {v}" for u, v in edges)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> Graph:
        lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
        head = lines[0].split()
        if len(head) != 4 or head[:2] != ["p", "graph"]:
            raise ValueError("expected header 'p graph <N> <M>'")
        n, m = int(head[2]), int(head[3])
        if len(lines) - 1 != m:
            raise ValueError(f"header promises {m} edges, found {len(lines) - 1}")
        edges = []
        for ln in lines[1:]:
            parts = ln.split()
            if len(parts) != 2:
                raise ValueError(f"bad edge line {ln!r}")
            u, v = int(parts[0]), int(parts[1])
            if not u < v:
                raise ValueError(f"edge line must satisfy u<v: {ln!r}")
            edges.append((u, v))
        g = cls.from_edges(n, edges)
        if g.edge_count() != m:
            raise ValueError("duplicate edges")
        return g

    def write(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def read(cls, path) -> Graph:
        return cls.from_text(Path(path).read_text())


class ColouredGraph:
    """A graph whose edges are split into blue and red spanning subgraphs."""

    __slots__ = ("base", "blue", "red")

    def __init__(self, base: Graph, blue: Graph, red: Graph):
        if blue.n != base.n or red.n != base.n:
            raise ValueError("colour classes must span the base vertex set")
        for v in range(base.n):
            if blue.adj[v] & red.adj[v] or (blue.adj[v] | red.adj[v]) != base.adj[v]:
                raise ValueError(f"colour classes do not partition the edges at vertex {v}")
        self.base, self.blue, self.red = base, blue, red

    @classmethod
    def from_blue(cls, base: Graph, blue_edges) -> ColouredGraph:
        blue = Graph.from_edges(base.n, blue_edges)
        red = Graph(base.n, [base.adj[v] & ~blue.adj[v] for v in range(base.n)], check=False)
        return cls(base, blue, red)

    @classmethod
    def from_colour_fn(cls, base: Graph, is_blue) -> ColouredGraph:
        return cls.from_blue(base, [e for e in base.edges() if is_blue(*e)])

    def colour(self, u: int, v: int) -> str:
        if self.blue.has_edge(u, v):
            return "B"
        if self.red.has_edge(u, v):
            return "R"
        raise KeyError(f"({u},{v}) is not an edge")

    def d_red(self, v: int, within: int) -> int:
        return popcount(self.red.adj[v] & within)

    def d_blue(self, v: int, within: int) -> int:
        return popcount(self.blue.adj[v] & within)

    def __eq__(self, other) -> bool:
        return isinstance(other, ColouredGraph) and self.base == other.base and self.blue == other.blue

    def to_text(self) -> str:
        edges = self.base.edges()
        lines = [f"p graph {self.base.n} {len(edges)}"]
        lines.extend(f"{u} {v} {self.colour(u, v)}" for u, v in edges)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> ColouredGraph:
        lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
        head = lines[0].split()
        if len(head) != 4 or head[:2] != ["p", "graph"]:
            raise ValueError("expected header 'p graph <N> <M>'")
        n, m = int(head[2]), int(head[3])
        if len(lines) - 1 != m:
            raise ValueError(f"header promises {m} edges, found {len(lines) - 1}")
        edges, blue = [], []
        for ln in lines[1:]:
            u, v, c = ln.split()
            u, v = int(u), int(v)
            if not u < v or c not in ("B", "R"):
                raise ValueError(f"bad coloured edge line {ln!r}")
            edges.append((u, v))
            if c == "B":
                blue.append((u, v))
        base = Graph.from_edges(n, edges)
        if base.edge_count() != m:
            raise ValueError("duplicate edges")
        return cls.from_blue(base, blue)

    def write(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def read(cls, path) -> ColouredGraph:
        return cls.from_text(Path(path).read_text())


# ============================================================================
# G(N, p)
# ============================================================================


@dataclass(frozen=True)
class GnpSpec:
    n_vertices: int
    p: float | Fraction
    seed: int

    def __post_init__(self):
        if self.n_vertices < 1:
            raise ValueError("n_vertices must be positive")
        if not 0 <= self.p <= 1:
            raise ValueError("p must lie in [0, 1]")


def _splitmix64(x):
    """SplitMix64 finaliser; works on Python ints and numpy uint64 arrays."""
    if isinstance(x, int):
        z = (x + 0x9E3779B97F4A7C15) & _M64
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
        return z ^ (z >> 31)
    z = x + np.uint64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def pair_uniforms(seed: int, u: int, vs: np.ndarray) -> np.ndarray:
    """64-bit hash for each pair (u, v), u < v, keyed only by (seed, u, v)."""
    key = _splitmix64(seed & _M64)
    codes = (np.uint64(u) << np.uint64(32)) | vs.astype(np.uint64)
    return _splitmix64(codes ^ np.uint64(key))


def sample_gnp(spec: GnpSpec, cap: int = VERTEX_CAP) -> Graph:
    n, p = spec.n_vertices, Fraction(spec.p)
    if n > cap:
        raise CapExceeded(f"{n} vertices exceeds the cap of {cap}")
    if p == 1:
        return Graph.complete(n)
    if p == 0:
        return Graph.empty(n)
    threshold = np.uint64(math.floor(p * (1 << 64)))
    dense = np.zeros((n, n), dtype=bool)
    for u in range(n - 1):
        vs = np.arange(u + 1, n, dtype=np.uint64)
        dense[u, u + 1:] = pair_uniforms(spec.seed, u, vs) < threshold
    dense |= dense.T
    return Graph(n, [_row_to_int(dense[v]) for v in range(n)], check=False)


def _row_to_int(row: np.ndarray) -> int:
    return int.from_bytes(np.packbits(row, bitorder="little").tobytes(), "little")


# ============================================================================
# (eta, p)-uniformity
# ============================================================================


@dataclass
class UniformityReport:
    eta: float
    p: float
    set_size: int
    verified_pairs: int = 0
    violations: list = field(default_factory=list)  # (A, B, observed, bound, kind)
    mode: str = "exhaustive"

    @property
    def uniform(self) -> bool:
        return not self.violations


def _uniformity_violations(G: Graph, A: tuple, B: tuple, eta: float, p: float, upper_only: bool):
    out = []
    amask, bmask = mask_of(A), mask_of(B)
    e = G.e_between(amask, bmask)
    expect = p * len(A) * len(B)
    if e > (1 + eta) * expect:
        out.append((A, B, e, (1 + eta) * expect, "pair_upper"))
    if not upper_only and e < (1 - eta) * expect:
        out.append((A, B, e, (1 - eta) * expect, "pair_lower"))
    return out


def _set_violations(G: Graph, A: tuple, eta: float, p: float, upper_only: bool):
    out = []
    e = G.e_within(mask_of(A))
    expect = p * math.comb(len(A), 2)
    if e > (1 + eta) * expect:
        out.append((A, (), e, (1 + eta) * expect, "set_upper"))
    if not upper_only and e < (1 - eta) * expect:
        out.append((A, (), e, (1 - eta) * expect, "set_lower"))
    return out


def check_uniformity(
    G: Graph,
    eta: float,
    p: float,
    budget: int = 5_000_000,
    *,
    mode: str = "exhaustive",
    seed: int = 0,
    full_range: bool = False,
    upper_only: bool = False,
) -> UniformityReport:
    """Check the (eta,p)-uniform inequalities.

    Exhaustive mode tests every disjoint pair of sets of size exactly
    ``ceil(eta*N)`` (or every size at least that with ``full_range``), plus the
    inside-edge bounds for each such set.  Sampled mode draws ``budget`` random
    disjoint pairs.  ``upper_only`` keeps only the upper bounds.
    """
    if not 0 < eta < 1:
        raise ValueError("eta must lie in (0, 1)")
    N = G.n
    a = math.ceil(eta * N)
    report = UniformityReport(eta=eta, p=p, set_size=a, mode=mode)
    if 2 * a > N:
        return report
    sizes = range(a, N - a + 1) if full_range else (a,)
    if mode == "exhaustive":
        total = sum(math.comb(N, s) * math.comb(N - s, t) for s in sizes for t in sizes if s + t <= N)
        if total > budget:
            raise BudgetExceeded(f"{total} set pairs exceed the budget of {budget}")
        for s in sizes:
            for A in combinations(range(N), s):
                report.violations += _set_violations(G, A, eta, p, upper_only)
                amask = mask_of(A)
                rest = [v for v in range(N) if not amask >> v & 1]
                for t in sizes:
                    for B in combinations(rest, t):
                        # each unordered pair once: A holds the smaller minimum vertex
                        if B[0] < A[0]:
                            continue
                        report.verified_pairs += 1
                        report.violations += _uniformity_violations(G, A, B, eta, p, upper_only)
        return report
    if mode != "sampled":
        raise ValueError(f"unknown mode {mode!r}")
    rng = np.random.default_rng(seed)
    for _ in range(budget):
        s, t = (int(rng.choice(list(sizes))) for _ in range(2)) if full_range else (a, a)
        if s + t > N:
            continue
        perm = rng.permutation(N)
        A, B = tuple(sorted(int(x) for x in perm[:s])), tuple(sorted(int(x) for x in perm[s:s + t]))
        report.verified_pairs += 1
        report.violations += _set_violations(G, A, eta, p, upper_only)
        report.violations += _uniformity_violations(G, A, B, eta, p, upper_only)
    return report


# ============================================================================
# Degree-type diagnostics
# ============================================================================


@dataclass
class GnpDiagnostics:
    low_degree_count: int
    low_degree_vertices: list[int]
    threshold: float
    weak_expander_verdict: object = None


def gnp_diagnostics(
    G: Graph,
    U,
    gamma: float,
    p: float,
    c: float | None = None,
    c_prime: float | None = None,
    budget: int = 5_000_000,
) -> GnpDiagnostics:
    """Count vertices with fewer than gamma*p*N/8 neighbours in U.

    When ``c`` and ``c_prime`` are given, also runs the weak-expander check with
    ``m1 = ceil(c/p)`` and ``m2 = ceil(c_prime*N)`` (heuristic fallback on budget).
    """
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    umask = U if isinstance(U, int) else mask_of(U)
    threshold = gamma * p * G.n / 8
    low = [v for v in range(G.n) if popcount(G.adj[v] & umask) < threshold]
    diag = GnpDiagnostics(len(low), low, threshold)
    if c is not None and c_prime is not None:
        from treeramsey.expanders import check_weak

        m1, m2 = math.ceil(c / p), math.ceil(c_prime * G.n)
        diag.weak_expander_verdict = check_weak(G, m1, m2, budget=budget, mode="auto")
    return diag


@dataclass(frozen=True)
class CodegreeStats:
    max_codegree: int
    min_degree: int


def codegree_stats(G: Graph) -> CodegreeStats:
    if G.n < 2:
        raise ValueError("need at least two vertices")
    adj = G.adj
    best = 0
    for u in range(G.n):
        row = adj[u]
        for v in range(u + 1, G.n):
            c = (row & adj[v]).bit_count()
            if c > best:
                best = c
    return CodegreeStats(best, min(popcount(r) for r in adj))
