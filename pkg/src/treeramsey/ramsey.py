"""Arrowing harness: colouring strategies, clique and tree searches, the weak-expander
dichotomy for red graphs, eps-good partitions and Monte Carlo sweeps."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from itertools import combinations

import numpy as np

from treeramsey.bits import bits, first_k, iter_bits, mask_of, popcount
from treeramsey.embedder import PLACEMENT_BUDGET, haxell_embed, validate_embedding
from treeramsey.errors import BudgetExceeded, BudgetExhausted, InternalAssertion, NoEmbedding, PreconditionBroken, TreeRamseyError
from treeramsey.expanders import DEFAULT_BUDGET, as_mask, check_haxell, check_weak, extract_expander
from treeramsey.graph_core import ColouredGraph, Graph, GnpSpec, sample_gnp
from treeramsey.trees import Tree, enumerate_trees, gen_random_tree

# ============================================================================
# Colourings
# ============================================================================


def extremal_parts(N: int, r: int, n: int) -> list[int]:
    """Part index per vertex: r balanced blocks when N <= rn, otherwise blocks of exactly n (the last may be short)."""
    if N <= r * n:
        return [v * r // N for v in range(N)]
    return [v // n for v in range(N)]


def colouring_from_parts(G: Graph, part: list[int]) -> ColouredGraph:
    """Edges inside a part red, edges across parts blue."""
    return ColouredGraph.from_colour_fn(G, lambda u, v: part[u] != part[v])


def extremal_colouring(N: int, r: int, n: int, G: Graph | None = None) -> ColouredGraph:
    G = Graph.complete(N) if G is None else G
    if G.n != N:
        raise ValueError(f"host has {G.n} vertices, expected {N}")
    return colouring_from_parts(G, extremal_parts(N, r, n))


def random_colouring(G: Graph, seed: int, blue_prob: float = 0.5) -> ColouredGraph:
    rng = np.random.default_rng(seed)
    edges = G.edges()
    blue = rng.random(len(edges)) < blue_prob
    return ColouredGraph.from_blue(G, [e for e, b in zip(edges, blue) if b])


def sparse_cut_colouring(G: Graph, r: int) -> ColouredGraph:
    """Heuristic r-way split: grow each part greedily by the vertex adding the fewest new external neighbours."""
    N = G.n
    part = [-1] * N
    free = G.full_mask
    for i in range(r - 1):
        target = (N - sum(1 for x in part if x >= 0)) // (r - i)
        if not free:
            break
        start = min(iter_bits(free), key=lambda v: (popcount(G.adj[v] & free), v))
        S = 1 << start
        while popcount(S) < target:
            ext = G.gamma(S) & free & ~S
            pool = ext if ext else free & ~S
            v = min(iter_bits(pool), key=lambda u: (popcount(G.adj[u] & free & ~S & ~ext), u))
            S |= 1 << v
        for v in iter_bits(S):
            part[v] = i
        free &= ~S
    for v in iter_bits(free):
        part[v] = r - 1
    return colouring_from_parts(G, part)


# ============================================================================
# Cliques
# ============================================================================


def find_clique(G: Graph, size: int, within=None) -> tuple[int, ...] | None:
    """Some clique of the given size (Bron-Kerbosch with pivoting, stopping at the first hit)."""
    P0 = G.full_mask if within is None else as_mask(within)
    adj = G.adj
    if size <= 0:
        return ()

    def bk(R, P, X):
        if len(R) == size:
            return R
        if len(R) + popcount(P) < size:
            return None
        PX = P | X
        u = max(iter_bits(PX), key=lambda w: popcount(P & adj[w]))
        for v in bits(P & ~adj[u]):
            found = bk(R + (v,), P & adj[v], X & adj[v])
            if found:
                return found
            P &= ~(1 << v)
            X |= 1 << v
        return None

    return bk((), P0, 0)


def canonical_clique(G_blue: Graph, sets, *, mode: str = "exhaustive", budget: int = DEFAULT_BUDGET, seed: int = 0, samples: int = 10_000):
    """A clique with one vertex in each of the given disjoint sets, or None.

    In exhaustive mode None means no such clique exists; in random mode it only
    means none was sampled.
    """
    masks = [as_mask(S) for S in sets]
    for i, a in enumerate(masks):
        for b in masks[i + 1 :]:
            if a & b:
                raise ValueError("sets must be pairwise disjoint")
    adj = G_blue.adj
    if mode == "random":
        rng = np.random.default_rng(seed)
        lists = [bits(S) for S in masks]
        if any(not ls for ls in lists):
            return None
        for _ in range(samples):
            pick = [ls[rng.integers(len(ls))] for ls in lists]
            if all(adj[a] >> b & 1 for a, b in combinations(pick, 2)):
                return tuple(pick)
        return None
    left = [budget]

    def rec(i, cand, chosen):
        if i == len(masks):
            return chosen
        for v in iter_bits(cand[i]):
            left[0] -= 1
            if left[0] < 0:
                raise BudgetExceeded("transversal clique search budget exhausted")
            nxt = cand[: i + 1] + [c & adj[v] for c in cand[i + 1 :]]
            if any(not c for c in nxt[i + 1 :]):
                continue
            found = rec(i + 1, nxt, chosen + (v,))
            if found:
                return found
        return None

    return rec(0, list(masks), ())


@dataclass(frozen=True)
class JansonResult:
    holds: bool
    lhs: float
    rhs: float
    log_lhs: float


def janson_condition(N: int, p: float, m: int, r: int, C: float) -> JansonResult:
    """m^(r+1) p^binom(r+1,2) >= C log binom(N, m), evaluated in log space."""
    if not 1 <= m <= N or not 0 < p <= 1:
        raise ValueError("need 1 <= m <= N and 0 < p <= 1")
    log_lhs = (r + 1) * math.log(m) + math.comb(r + 1, 2) * math.log(p)
    log_binom = math.lgamma(N + 1) - math.lgamma(m + 1) - math.lgamma(N - m + 1)
    rhs = C * max(log_binom, 0.0)
    lhs = math.exp(log_lhs)
    holds = rhs <= 0 or log_lhs >= math.log(rhs)
    return JansonResult(holds, lhs, rhs, log_lhs)


def janson_trial(N: int, p: float, m: int, r: int, seed: int) -> tuple[int, ...] | None:
    """All-blue colouring of G(N,p): a transversal K_{r+1} across r+1 random disjoint m-sets, or None."""
    G = sample_gnp(GnpSpec(N, p, seed))
    perm = np.random.default_rng(seed).permutation(N)
    sets = [[int(v) for v in perm[i * m : (i + 1) * m]] for i in range(r + 1)]
    return canonical_clique(G, sets)


# ============================================================================
# Arrowing
# ============================================================================


@dataclass
class ArrowVerdict:
    kind: str  # BlueClique | RedFamilyEmbedded | RedTreeMissing | Undecided
    clique: tuple[int, ...] = ()
    embeddings: list[dict[int, int]] = field(default_factory=list)
    tree_id: int = -1
    exhaustive: bool = False
    log: str = ""
    regime: str = ""

    @property
    def non_arrow(self) -> bool:
        return self.kind == "RedTreeMissing" and self.exhaustive

    @property
    def witness_size(self) -> int:
        if self.kind == "BlueClique":
            return len(self.clique)
        if self.kind == "RedFamilyEmbedded":
            return len(self.embeddings)
        return 0


def tree_family(n: int, D: int, *, seed: int = 0, samples: int = 32, exhaustive_up_to: int = 9) -> tuple[list[Tree], str]:
    """All trees with n edges and max degree <= D when n is small, otherwise seeded random samples."""
    if n <= exhaustive_up_to:
        return enumerate_trees(n, D), "enumerated"
    return [gen_random_tree(n, D, seed + i) for i in range(samples)], "sampled"


def check_colouring(CG: ColouredGraph, r: int, family, *, budget: int = PLACEMENT_BUDGET, regime: str = "") -> ArrowVerdict:
    """Blue K_{r+1}, else embed every tree of the family in the red graph."""
    clique = find_clique(CG.blue, r + 1)
    if clique is not None:
        return ArrowVerdict("BlueClique", clique=tuple(sorted(clique)), regime=regime)
    embs = []
    for i, T in enumerate(family):
        try:
            e = haxell_embed(CG.red, T, budget=budget)
        except NoEmbedding as exc:
            return ArrowVerdict("RedTreeMissing", tree_id=i, exhaustive=True, log=str(exc), regime=regime)
        except BudgetExhausted as exc:
            return ArrowVerdict("Undecided", tree_id=i, exhaustive=False, log=str(exc), regime=regime)
        embs.append(e.mapping())
    return ArrowVerdict("RedFamilyEmbedded", embeddings=embs, regime=regime)


def validate_verdict(CG: ColouredGraph, r: int, family, v: ArrowVerdict) -> list[str]:
    """Witness check independent of the search that produced it."""
    if v.kind == "BlueClique":
        c = v.clique
        if len(c) != r + 1 or len(set(c)) != len(c):
            return ["clique has the wrong size"]
        return [f"{a}{b} is not blue" for a, b in combinations(c, 2) if not CG.blue.has_edge(a, b)]
    if v.kind == "RedFamilyEmbedded":
        out = []
        for T, mp in zip(family, v.embeddings):
            out += validate_embedding(T, CG.red, mp)
        if len(v.embeddings) != len(family):
            out.append("some family member has no embedding")
        return out
    return []


@dataclass
class ArrowResult:
    kind: str  # Arrows | NonArrowWitness
    witness: ColouredGraph | None = None
    colourings: int = 0
    survivors: int = 0


def _edge_clique_masks(G: Graph, size: int) -> list[int]:
    index = {e: i for i, e in enumerate(G.edges())}
    out = []

    def rec(chosen, cand):
        if len(chosen) == size:
            m = 0
            for a, b in combinations(chosen, 2):
                m |= 1 << index[(a, b)]
            out.append(m)
            return
        for v in iter_bits(cand):
            rec(chosen + (v,), cand & G.adj[v] & ~((2 << v) - 1))

    rec((), G.full_mask)
    return out


def arrow_exhaustive(G: Graph, r: int, family, *, max_edges: int = 22, budget: int = PLACEMENT_BUDGET) -> ArrowResult:
    """Decide G -> (K_{r+1}, family) over all 2^e(G) colourings.

    Bit i of a colouring index marks edge i (in sorted order) blue.  A vectorised
    pass discards colourings with a blue K_{r+1}; each survivor is searched for a
    missing red tree.  The first survivor missing some tree is the witness.
    """
    edges = G.edges()
    E = len(edges)
    if E > max_edges:
        raise BudgetExceeded(f"2^{E} colourings exceed the cap of 2^{max_edges}")
    masks = np.arange(1 << E, dtype=np.int64)
    has_clique = np.zeros(1 << E, dtype=bool)
    for cm in _edge_clique_masks(G, r + 1):
        has_clique |= (masks & cm) == cm
    survivors = np.flatnonzero(~has_clique)
    del masks, has_clique
    nbr_bits = [(1 << b, 1 << a) for a, b in edges]
    for idx in survivors:
        idx = int(idx)
        red = [0] * G.n
        for i, (a, b) in enumerate(edges):
            if not idx >> i & 1:
                red[a] |= nbr_bits[i][0]
                red[b] |= nbr_bits[i][1]
        R = Graph(G.n, red, check=False)
        for T in family:
            try:
                haxell_embed(R, T, budget=budget)
            except NoEmbedding:
                blue = [e for i, e in enumerate(edges) if idx >> i & 1]
                return ArrowResult("NonArrowWitness", ColouredGraph.from_blue(G, blue), 1 << E, len(survivors))
            except BudgetExhausted as exc:
                raise BudgetExceeded(f"colouring {idx} undecided: {exc}") from exc
    return ArrowResult("Arrows", None, 1 << E, len(survivors))


# ============================================================================
# Weak-expander dichotomy for red graphs
# ============================================================================


@dataclass
class WeaklyCliqueOutcome:
    kind: str  # UniversalityCertificate | BlueSets
    sets: tuple[tuple[int, ...], ...] = ()
    kept: tuple[int, ...] = ()
    stage: int = -1
    m_s: int = 0
    params: dict = field(default_factory=dict)
    embeddings: list[dict[int, int]] = field(default_factory=list)


def weakly_clique(G_red: Graph, n: int, m: int, r: int, D: int, *, budget: int = DEFAULT_BUDGET, sample_trees=()) -> WeaklyCliqueOutcome:
    """Either r+1 disjoint m-sets with no red edges between them, or a vertex set certified
    to contain every tree with n edges and max degree <= D.

    Stage s asks whether the current set V_s is a weak (m, m_s)-expander with
    m_s = (r-s-1)n + (r-s)5Dm.  A violating pair (U, Y) gives the next blue set and
    V_{s+1} = Y; otherwise a large subset of V_s satisfies both small-set
    conditions for trees on n+1 vertices.
    """
    N = G_red.n
    if N < r * n + 10 * D * r * m:
        raise PreconditionBroken(f"N = {N} < rn + 10Drm = {r * n + 10 * D * r * m}")
    V = G_red.full_mask
    U: list[int] = []
    params = {"n": n, "m": m, "r": r, "D": D, "t": n + 1}
    for s in range(r):
        ms = (r - s - 1) * n + (r - s) * 5 * D * m
        v = check_weak(G_red, m, ms, within=V, budget=budget)
        if v.certified:
            ext = extract_expander(G_red, m, ms, D, within=V, budget=budget)
            hax = check_haxell(G_red, m, D, n + 1, within=ext.kept_mask, budget=budget)
            if not hax.certified:
                raise InternalAssertion(f"stage {s}: extracted set fails the tree conditions ({hax.kind}, X={hax.X})")
            embs = []
            for T in sample_trees:
                e = haxell_embed(G_red, T, within=ext.kept_mask)
                embs.append(e.mapping())
            return WeaklyCliqueOutcome("UniversalityCertificate", kept=ext.kept, stage=s, m_s=ms, params=params, embeddings=embs)
        U.append(mask_of(v.X))
        V = mask_of(v.Y)
    U.append(mask_of(first_k(V, m)))
    return WeaklyCliqueOutcome("BlueSets", sets=tuple(tuple(bits(u)) for u in U), stage=r, params=params)


def validate_weakly_clique(G_red: Graph, out: WeaklyCliqueOutcome, *, budget: int = DEFAULT_BUDGET) -> list[str]:
    problems = []
    p = out.params
    if out.kind == "BlueSets":
        masks = [mask_of(s) for s in out.sets]
        if len(masks) != p["r"] + 1:
            problems.append(f"{len(masks)} sets instead of r+1")
        for i, a in enumerate(masks):
            if popcount(a) != p["m"]:
                problems.append(f"set {i} has {popcount(a)} vertices")
            for j in range(i + 1, len(masks)):
                if a & masks[j]:
                    problems.append(f"sets {i},{j} intersect")
                if G_red.e_between(a, masks[j]):
                    problems.append(f"sets {i},{j} span {G_red.e_between(a, masks[j])} red edges")
    elif out.kind == "UniversalityCertificate":
        kept = mask_of(out.kept)
        if kept & ~G_red.full_mask:
            problems.append("kept set is not a vertex subset")
        v = check_haxell(G_red, p["m"], p["D"], p["t"], within=kept, budget=budget)
        if not v.certified:
            problems.append(f"tree conditions fail: {v.kind} X={v.X}")
    else:
        problems.append(f"unknown outcome {out.kind}")
    return problems


# ============================================================================
# eps-good partitions
# ============================================================================


@dataclass
class EpsGoodReport:
    violations: list[tuple[str, int, int, float, float]]  # (condition, part, vertex or -1, observed, bound)

    @property
    def ok(self) -> bool:
        return not self.violations


def eps_good_check(CG: ColouredGraph, parts, eps: float, p: float, r: int, D: int) -> EpsGoodReport:
    """``parts`` is [V_0, V_1, ..., V_r]; V_0 is the leftover and is not checked."""
    N = CG.base.n
    masks = [as_mask(P) for P in parts]
    viol = []
    size_bound = (1 - 1 / (2 * D)) * N / r
    red_bound = p * N / (32 * r)
    blue_bound = eps * p * N
    for i in range(1, len(masks)):
        V = masks[i]
        if popcount(V) < size_bound:
            viol.append(("a", i, -1, popcount(V), size_bound))
        for v in iter_bits(V):
            dr = popcount(CG.red.adj[v] & V)
            if dr < red_bound:
                viol.append(("b", i, v, dr, red_bound))
            db = popcount(CG.blue.adj[v] & V)
            if db > blue_bound:
                viol.append(("c", i, v, db, blue_bound))
    return EpsGoodReport(viol)


@dataclass
class EpsGoodPartition:
    parts: list[tuple[int, ...]]  # U_0 (leftover), U_1..U_r
    eps: float
    p: float
    r: int
    D: int
    moves: list[tuple[int, int]] = field(default_factory=list)
    report: EpsGoodReport | None = None


def refine_partition(CG: ColouredGraph, parts, eps: float, p: float, r: int, D: int) -> EpsGoodPartition:
    """Strip high-blue and low-red vertices into U_0, then move U_0 vertices back wherever
    they have red degree >= pN/32r and the receiving part stays valid."""
    N = CG.base.n
    red, blue = CG.red.adj, CG.blue.adj
    V = [as_mask(P) for P in parts]
    if len(V) != r:
        raise ValueError(f"expected {r} parts")
    red_bound = p * N / (32 * r)
    blue_bound = eps * p * N
    U = [0] * (r + 1)
    covered = 0
    for i, Vi in enumerate(V, start=1):
        B = mask_of(v for v in iter_bits(Vi) if popcount(blue[v] & Vi) >= blue_bound)
        rest = Vi & ~B
        Bp = mask_of(v for v in iter_bits(rest) if popcount(red[v] & rest) <= p * N / (16 * r))
        U[i] = rest & ~Bp
        U[0] |= B | Bp
        covered |= Vi
    U[0] |= CG.base.full_mask & ~covered

    def bad(v, S):
        return popcount(red[v] & S) < red_bound or popcount(blue[v] & S) > blue_bound

    changed = True
    while changed:
        changed = False
        for i in range(1, r + 1):
            for v in bits(U[i]):
                if bad(v, U[i]):
                    U[i] &= ~(1 << v)
                    U[0] |= 1 << v
                    changed = True
    moves = []
    changed = True
    while changed:
        changed = False
        for u in bits(U[0]):
            for i in range(1, r + 1):
                S = U[i] | (1 << u)
                if popcount(red[u] & U[i]) < red_bound or popcount(blue[u] & U[i]) > blue_bound:
                    continue
                if any(popcount(blue[w] & S) > blue_bound for w in iter_bits(blue[u] & U[i])):
                    continue
                U[i] = S
                U[0] &= ~(1 << u)
                moves.append((u, i))
                changed = True
                break
    out = EpsGoodPartition([tuple(bits(x)) for x in U], eps, p, r, D, moves)
    out.report = eps_good_check(CG, U, eps, p, r, D)
    if any(c in ("b", "c") for c, *_ in out.report.violations):
        raise InternalAssertion("refined partition violates a per-vertex condition")
    return out


# ============================================================================
# Monte Carlo sweeps
# ============================================================================

CSV_HEADER = ["r", "D", "n", "N", "p", "seed", "strategy", "verdict", "witness_size", "ms"]
STRATEGIES = ("extremal", "random", "sparse-cut")


@dataclass
class SweepConfig:
    r: int
    D: int
    n: int
    N_grid: list[int]
    p_grid: list[float]
    seeds: list[int]
    strategies: list[str] = field(default_factory=lambda: ["extremal"])
    tree_source: str = "auto"  # auto | enumerated | sampled
    tree_samples: int = 16
    tree_seed: int = 0
    weakly_clique: bool = False
    m: int = 1
    budget: int = PLACEMENT_BUDGET
    workers: int = 1
    timing: bool = False

    @classmethod
    def from_dict(cls, d: dict) -> SweepConfig:
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**d)
        for s in cfg.strategies:
            if s not in STRATEGIES:
                raise ValueError(f"unknown strategy {s!r}")
        return cfg

    @classmethod
    def load(cls, path) -> SweepConfig:
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return asdict(self)


def _family(cfg: SweepConfig) -> tuple[list[Tree], str]:
    if cfg.tree_source == "sampled" or (cfg.tree_source == "auto" and cfg.n > 9):
        return [gen_random_tree(cfg.n, cfg.D, cfg.tree_seed + i) for i in range(cfg.tree_samples)], "sampled"
    return enumerate_trees(cfg.n, cfg.D), "enumerated"


def _colour(strategy: str, G: Graph, cfg: SweepConfig, seed: int) -> ColouredGraph:
    if strategy == "extremal":
        return extremal_colouring(G.n, cfg.r, cfg.n, G)
    if strategy == "random":
        return random_colouring(G, seed)
    return sparse_cut_colouring(G, cfg.r)


def _fmt_p(p: float) -> str:
    return repr(float(p))


def _run_task(args) -> list[list[str]]:
    cfg, N, p, seed = args
    family, regime = _family(cfg)
    G = sample_gnp(GnpSpec(N, p, seed))
    rows = []
    for strategy in cfg.strategies:
        t0 = time.perf_counter()
        base = [str(cfg.r), str(cfg.D), str(cfg.n), str(N), _fmt_p(p), str(seed)]
        try:
            CG = _colour(strategy, G, cfg, seed)
            v = check_colouring(CG, cfg.r, family, budget=cfg.budget, regime=regime)
            verdict, wsize = v.kind, v.witness_size
        except TreeRamseyError as exc:
            CG = None
            verdict, wsize = f"Error({type(exc).__name__})", 0
        ms = f"{(time.perf_counter() - t0) * 1000:.1f}" if cfg.timing else ""
        rows.append(base + [strategy, verdict, str(wsize), ms])
        if cfg.weakly_clique and CG is not None:
            t0 = time.perf_counter()
            try:
                if N < cfg.r * cfg.n + 10 * cfg.D * cfg.r * cfg.m:
                    verdict, wsize = "Skipped", 0
                else:
                    out = weakly_clique(CG.red, cfg.n, cfg.m, cfg.r, cfg.D)
                    if out.kind == "BlueSets":
                        c = canonical_clique(CG.blue, out.sets)
                        verdict = "BlueSets+Clique" if c is not None else "BlueSets+NoClique"
                        wsize = len(c) if c is not None else 0
                    else:
                        verdict, wsize = "Universal", len(out.kept)
            except TreeRamseyError as exc:
                verdict, wsize = f"Error({type(exc).__name__})", 0
            ms = f"{(time.perf_counter() - t0) * 1000:.1f}" if cfg.timing else ""
            rows.append(base + [f"{strategy}/weakly-clique", verdict, str(wsize), ms])
    return rows


def mc_sweep(cfg: SweepConfig) -> list[list[str]]:
    """One row per (N, p, seed, strategy), sorted by grid point, seed and strategy order."""
    tasks = [(cfg, N, p, s) for N in cfg.N_grid for p in cfg.p_grid for s in cfg.seeds]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            chunks = list(ex.map(_run_task, tasks))
    else:
        chunks = [_run_task(t) for t in tasks]
    return [row for chunk in chunks for row in chunk]


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    w.writerows(rows)
    return buf.getvalue()


def non_arrow_frequency(rows, strategy: str = "extremal") -> dict[int, tuple[float, float, int]]:
    """Per N: (fraction of RedTreeMissing verdicts, its standard error, sample count)."""
    per: dict[int, list[int]] = {}
    for row in rows:
        if row[6] == strategy:
            per.setdefault(int(row[3]), []).append(1 if row[7] == "RedTreeMissing" else 0)
    out = {}
    for N, xs in sorted(per.items()):
        f = sum(xs) / len(xs)
        out[N] = (f, math.sqrt(f * (1 - f) / len(xs)), len(xs))
    return out
