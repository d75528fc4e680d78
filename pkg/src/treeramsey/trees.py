"""Bounded-degree trees: sampling, enumeration, split edges and subtree decompositions."""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from treeramsey.errors import CapExceeded, InvalidBeta, InvalidDegreeBound, SplitNotFound

ENUMERATION_CAP = 9


class Tree:
    """Rooted tree on vertices ``0..n-1`` stored as a parent array (root has parent -1)."""

    def __init__(self, parent, root: int):
        parent = tuple(int(p) for p in parent)
        n = len(parent)
        if n == 0:
            raise ValueError("a tree needs at least one vertex")
        if not 0 <= root < n or parent[root] != -1:
            raise ValueError("root must carry the sentinel parent -1")
        for v, p in enumerate(parent):
            if v != root and not 0 <= p < n:
                raise ValueError(f"vertex {v} has invalid parent {p}")
        self.parent = parent
        self.root = root
        self.n = n
        if len(self.bfs_order) != n:
            raise ValueError("parent array does not describe a tree")

    @classmethod
    def from_edges(cls, n: int, edges, root: int = 0) -> Tree:
        nbrs = [[] for _ in range(n)]
        for u, v in edges:
            nbrs[u].append(v)
            nbrs[v].append(u)
        if len(edges) != n - 1:
            raise ValueError("a tree on n vertices has n-1 edges")
        parent = [-2] * n
        parent[root] = -1
        queue = deque([root])
        while queue:
            x = queue.popleft()
            for y in sorted(nbrs[x]):
                if parent[y] == -2:
                    parent[y] = x
                    queue.append(y)
        if -2 in parent:
            raise ValueError("edges do not form a connected tree")
        return cls(parent, root)

    @cached_property
    def children(self) -> tuple[tuple[int, ...], ...]:
        ch = [[] for _ in range(self.n)]
        for v, p in enumerate(self.parent):
            if p >= 0:
                ch[p].append(v)
        return tuple(tuple(c) for c in ch)

    @cached_property
    def neighbours(self) -> tuple[tuple[int, ...], ...]:
        return tuple(
            tuple(sorted(self.children[v] + ((self.parent[v],) if self.parent[v] >= 0 else ())))
            for v in range(self.n)
        )

    @cached_property
    def bfs_order(self) -> tuple[int, ...]:
        order, queue, seen = [], deque([self.root]), {self.root}
        while queue:
            x = queue.popleft()
            order.append(x)
            for c in self.children[x]:
                if c in seen:
                    return tuple()
                seen.add(c)
                queue.append(c)
        return tuple(order)

    @cached_property
    def depth(self) -> tuple[int, ...]:
        d = [0] * self.n
        for v in self.bfs_order[1:]:
            d[v] = d[self.parent[v]] + 1
        return tuple(d)

    @cached_property
    def subtree_sizes(self) -> tuple[int, ...]:
        size = [1] * self.n
        for v in reversed(self.bfs_order[1:]):
            size[self.parent[v]] += size[v]
        return tuple(size)

    def degree(self, v: int) -> int:
        return len(self.neighbours[v])

    def max_degree(self) -> int:
        return max((self.degree(v) for v in range(self.n)), default=0)

    def edges(self) -> list[tuple[int, int]]:
        return sorted((min(v, p), max(v, p)) for v, p in enumerate(self.parent) if p >= 0)

    @property
    def edge_count(self) -> int:
        return self.n - 1

    def leaves(self) -> list[int]:
        if self.n == 1:
            return [0]
        return [v for v in range(self.n) if self.degree(v) == 1]

    @cached_property
    def colour(self) -> tuple[int, ...]:
        """Bipartition colour (1 or 2) per vertex; colour 2 is the larger class, a tie puts the root in colour 1."""
        parity = [d & 1 for d in self.depth]
        root_side = parity.count(0)
        root_colour = 1 if root_side <= self.n - root_side else 2
        return tuple(root_colour if par == 0 else 3 - root_colour for par in parity)

    def colour_class(self, c: int) -> list[int]:
        return [v for v in range(self.n) if self.colour[v] == c]

    def rerooted(self, root: int) -> Tree:
        return Tree.from_edges(self.n, self.edges(), root)

    def with_convention_root(self) -> Tree:
        """Re-root at the smallest vertex of the smaller bipartition class (class of vertex 0 on a tie)."""
        if self.n == 1:
            return self
        t = self.rerooted(0)
        classes = [[v for v in range(self.n) if t.depth[v] % 2 == side] for side in (0, 1)]
        small = classes[0] if len(classes[0]) <= len(classes[1]) else classes[1]
        return self.rerooted(min(small))

    def induced(self, vertices, root: int) -> tuple[Tree, list[int]]:
        """Subtree on a connected vertex set, relabelled; returns (tree, new->old map)."""
        vs = sorted(set(vertices))
        index = {v: i for i, v in enumerate(vs)}
        edges = [(index[u], index[v]) for u, v in self.edges() if u in index and v in index]
        return Tree.from_edges(len(vs), edges, index[root]), vs

    def __eq__(self, other) -> bool:
        return isinstance(other, Tree) and self.parent == other.parent and self.root == other.root

    def __hash__(self) -> int:
        return hash((self.parent, self.root))

    def __repr__(self) -> str:
        return f"Tree(n={self.n}, root={self.root})"

    def to_text(self) -> str:
        lines = [f"p tree {self.n} {self.root}"]
        lines.extend(f"{v} {p}" for v, p in enumerate(self.parent) if p >= 0)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> Tree:
        lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
        head = lines[0].split()
        if len(head) != 4 or head[:2] != ["p", "tree"]:
            raise ValueError("expected header 'p tree <n_vertices> <root>'")
        n, root = int(head[2]), int(head[3])
        parent = [-1] * n
        seen = set()
        for ln in lines[1:]:
            c, p = (int(x) for x in ln.split())
            if c in seen or c == root:
                raise ValueError(f"duplicate or root child line {ln!r}")
            seen.add(c)
            parent[c] = p
        if len(seen) != n - 1:
            raise ValueError("every non-root vertex needs exactly one parent line")
        return cls(parent, root)

    def write(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def read(cls, path) -> Tree:
        return cls.from_text(Path(path).read_text())


def path_tree(n_edges: int) -> Tree:
    return Tree.from_edges(n_edges + 1, [(i, i + 1) for i in range(n_edges)], 0)


def star_tree(n_edges: int) -> Tree:
    return Tree.from_edges(n_edges + 1, [(0, i) for i in range(1, n_edges + 1)], 0)


# ============================================================================
# Random bounded-degree trees via label sequences
# ============================================================================


def _truncated_poisson_rate(mean: float, cap: int) -> float:
    """Rate whose Poisson law truncated to {0..cap} has the given mean."""

    def trunc_mean(lam):
        w = [lam**j / math.factorial(j) for j in range(cap + 1)]
        return sum(j * x for j, x in enumerate(w)) / sum(w)

    lo, hi = 1e-12, 1.0
    while trunc_mean(hi) < mean:
        hi *= 2
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if trunc_mean(mid) < mean:
            lo = mid
        else:
            hi = mid
    return math.sqrt(lo * hi)


def _bounded_multiplicities(labels: int, length: int, cap: int, rng) -> np.ndarray:
    """Multiplicity vector of a uniform sequence of given length with every multiplicity <= cap.

    The count of sequences with multiplicities (m_j) is length!/prod m_j!, which is
    proportional to the law of independent truncated Poissons conditioned on the sum;
    we sample that conditional law by rejection.
    """
    if length == 0:
        return np.zeros(labels, dtype=np.int64)
    lam = _truncated_poisson_rate(length / labels, cap)
    w = np.array([lam**j / math.factorial(j) for j in range(cap + 1)])
    w /= w.sum()
    while True:
        mult = rng.choice(cap + 1, size=labels, p=w)
        if int(mult.sum()) == length:
            return mult


def decode_label_sequence(seq, n_vertices: int) -> list[tuple[int, int]]:
    """Tree edges encoded by a label sequence of length n_vertices-2."""
    degree = [1] * n_vertices
    for x in seq:
        degree[x] += 1
    heap = [v for v in range(n_vertices) if degree[v] == 1]
    heapq.heapify(heap)
    edges = []
    for x in seq:
        leaf = heapq.heappop(heap)
        edges.append((min(leaf, x), max(leaf, x)))
        degree[x] -= 1
        if degree[x] == 1:
            heapq.heappush(heap, x)
    u, v = heapq.heappop(heap), heapq.heappop(heap)
    edges.append((min(u, v), max(u, v)))
    return edges


def gen_random_tree(n_edges: int, D: int, seed: int) -> Tree:
    """Uniform labelled tree with ``n_edges`` edges and maximum degree at most ``D``."""
    if D < 2:
        raise InvalidDegreeBound(f"D={D} < 2")
    if n_edges < 1:
        raise ValueError("n_edges must be positive")
    rng = np.random.default_rng(seed)
    n_vertices = n_edges + 1
    mult = _bounded_multiplicities(n_vertices, n_edges - 1, D - 1, rng)
    seq = rng.permutation(np.repeat(np.arange(n_vertices), mult)).tolist()
    edges = decode_label_sequence(seq, n_vertices)
    return Tree.from_edges(n_vertices, edges, 0).with_convention_root()


# ============================================================================
# Enumeration of free trees up to isomorphism
# ============================================================================


def _rooted_code(nbrs, root: int) -> str:
    parent = {root: -1}
    order = [root]
    for x in order:
        for y in nbrs[x]:
            if y not in parent:
                parent[y] = x
                order.append(y)
    code = {}
    for x in reversed(order):
        code[x] = "(" + "".join(sorted(code[y] for y in nbrs[x] if parent.get(y) == x and y != parent[x])) + ")"
    return code[root]


def centroids(n: int, nbrs) -> list[int]:
    t = Tree.from_edges(n, sorted({(min(u, v), max(u, v)) for u in range(n) for v in nbrs[u]}), 0)
    size = t.subtree_sizes
    best, out = n + 1, []
    for v in range(n):
        heaviest = max([size[c] for c in t.children[v]] + [n - size[v]])
        if heaviest < best:
            best, out = heaviest, [v]
        elif heaviest == best:
            out.append(v)
    return out


def canonical_form(T: Tree) -> str:
    """Isomorphism-invariant encoding of the underlying free tree (AHU code at a centroid)."""
    nbrs = T.neighbours
    return min(_rooted_code(nbrs, c) for c in centroids(T.n, nbrs))


def tree_from_code(code: str) -> Tree:
    parent, stack = [], []
    for ch in code:
        if ch == "(":
            parent.append(stack[-1] if stack else -1)
            stack.append(len(parent) - 1)
        else:
            stack.pop()
    return Tree(parent, 0)


def enumerate_trees(n_edges: int, D: int | None = None, cap: int = ENUMERATION_CAP) -> list[Tree]:
    """One representative per isomorphism class of free trees with ``n_edges`` edges and max degree <= D."""
    if n_edges > cap:
        raise CapExceeded(f"n_edges={n_edges} exceeds the enumeration cap {cap}")
    if n_edges < 0:
        raise ValueError("n_edges must be non-negative")
    D = n_edges if D is None else D
    level = {"()": [[]]}
    for k in range(n_edges):
        nxt = {}
        for adj in level.values():
            for v in range(k + 1):
                if len(adj[v]) >= D:
                    continue
                grown = [list(a) for a in adj] + [[v]]
                grown[v].append(k + 1)
                code = min(_rooted_code(grown, c) for c in centroids(k + 2, grown))
                nxt.setdefault(code, grown)
        level = nxt
    return [tree_from_code(code).with_convention_root() for code in sorted(level)]


# ============================================================================
# Split edges
# ============================================================================


@dataclass(frozen=True)
class SplitEdge:
    u1: int
    u2: int
    side1: int  # vertices on u1's side
    side2: int


def find_split_edge(T: Tree, D: int) -> SplitEdge:
    """Edge whose removal leaves two sides of at least ceil(n/D) vertices, maximising the smaller side."""
    if T.n < 2:
        raise ValueError("the tree has no edge")
    need = math.ceil(T.edge_count / D)
    size = T.subtree_sizes
    best = None
    for v in range(T.n):
        p = T.parent[v]
        if p < 0:
            continue
        below, above = size[v], T.n - size[v]
        if min(below, above) < need:
            continue
        u1, u2 = min(v, p), max(v, p)
        side1 = below if u1 == v else above
        key = (-min(below, above), u1, u2)
        if best is None or key < best[0]:
            best = (key, SplitEdge(u1, u2, side1, T.n - side1))
    if best is None:
        raise SplitNotFound(f"no edge leaves both sides >= {need} (max degree {T.max_degree()}, D={D})")
    return best[1]


def split_sides(T: Tree, edge: SplitEdge) -> tuple[list[int], list[int]]:
    """Vertex lists on the u1 side and the u2 side of ``edge``."""
    side = {edge.u1: 1, edge.u2: 2}
    queue = deque([edge.u1, edge.u2])
    while queue:
        x = queue.popleft()
        for y in T.neighbours[x]:
            if y not in side:
                side[y] = side[x]
                queue.append(y)
    return sorted(v for v, s in side.items() if s == 1), sorted(v for v, s in side.items() if s == 2)


# ============================================================================
# Subtree decomposition with even-depth roots
# ============================================================================


@dataclass
class SubtreeDecomposition:
    subtrees: list[tuple[frozenset, int]]  # (vertex set, root), root piece first
    cluster_edges: list[tuple[int, int]]
    beta: float
    D: int
    base_roots: tuple[int, ...] = field(default=(), compare=False)

    @property
    def t(self) -> int:
        return len(self.subtrees)

    def cluster_degrees(self) -> list[int]:
        deg = [0] * self.t
        for i, j in self.cluster_edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def class_sizes(self, T: Tree) -> list[tuple[int, int]]:
        """(|colour-1 part|, |colour-2 part|) per subtree."""
        out = []
        for verts, _ in self.subtrees:
            c1 = sum(1 for v in verts if T.colour[v] == 1)
            out.append((c1, len(verts) - c1))
        return out

    def to_text(self, n_vertices: int) -> str:
        lines = [f"p decomp {n_vertices} {self.t} {self.beta!r} {self.D}"]
        for i, (verts, root) in enumerate(self.subtrees):
            lines.append(f"s {i} {root} " + " ".join(str(v) for v in sorted(verts)))
        lines.extend(f"c {i} {j}" for i, j in self.cluster_edges)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> SubtreeDecomposition:
        lines = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
        head = lines[0]
        if head[:2] != ["p", "decomp"]:
            raise ValueError("expected header 'p decomp ...'")
        t, beta, D = int(head[3]), float(head[4]), int(head[5])
        subtrees, edges = [None] * t, []
        for parts in lines[1:]:
            if parts[0] == "s":
                subtrees[int(parts[1])] = (frozenset(int(x) for x in parts[3:]), int(parts[2]))
            elif parts[0] == "c":
                edges.append((int(parts[1]), int(parts[2])))
            else:
                raise ValueError(f"bad decomposition line {parts}")
        return cls(subtrees, edges, beta, D)


def _base_roots(T: Tree, beta: float, D: int) -> set[int]:
    """Cut points for pieces of size at most D^2*beta*|T| with at most D^3 neighbouring pieces.

    A vertex becomes a piece root once its pending component reaches ceil(beta*|T|)
    vertices or has D^2 pieces hanging below it; children's pending components are
    below both triggers, which bounds piece size and piece adjacency.
    """
    size_trigger = math.ceil(beta * T.n)
    hang_trigger = D * D
    comp_size = [0] * T.n
    comp_hang = [0] * T.n
    roots = set()
    for v in reversed(T.bfs_order):
        size, hang = 1, 0
        for c in T.children[v]:
            if c in roots:
                hang += 1
            else:
                size += comp_size[c]
                hang += comp_hang[c]
        comp_size[v], comp_hang[v] = size, hang
        if v == T.root or size >= size_trigger or hang >= hang_trigger:
            roots.add(v)
    return roots


def _even_depth_roots(T: Tree, roots: set[int]) -> set[int]:
    """BFS over pieces; an odd-depth child root joins the current piece and its children become roots."""
    roots = set(roots)
    depth = T.depth
    queue = deque([T.root])
    while queue:
        top = queue.popleft()
        stack = [top]
        while stack:
            x = stack.pop()
            for c in T.children[x]:
                if c not in roots:
                    stack.append(c)
                elif depth[c] % 2:
                    roots.discard(c)
                    roots.update(T.children[c])
                    stack.append(c)
                else:
                    queue.append(c)
    return roots


def _pieces_from_roots(T: Tree, roots: set[int]) -> tuple[list[tuple[frozenset, int]], list[tuple[int, int]]]:
    owner = [0] * T.n
    for v in T.bfs_order:
        owner[v] = v if v in roots else owner[T.parent[v]]
    order = [v for v in T.bfs_order if v in roots]
    index = {r: i for i, r in enumerate(order)}
    members = [[] for _ in order]
    for v in range(T.n):
        members[index[owner[v]]].append(v)
    pieces = [(frozenset(members[index[r]]), r) for r in order]
    edges = [(index[owner[T.parent[r]]], index[r]) for r in order if r != T.root]
    return pieces, edges


def cut_tree(T: Tree, beta: float, D: int) -> SubtreeDecomposition:
    if beta < 1 / T.n or beta > 1:
        raise InvalidBeta(f"beta={beta} outside [1/|V(T)|, 1] for |V(T)|={T.n}")
    if D < 2:
        raise InvalidDegreeBound(f"D={D} < 2")
    if T.max_degree() > D:
        raise ValueError(f"tree has max degree {T.max_degree()} > D={D}")
    base = _base_roots(T, beta, D)
    pieces, edges = _pieces_from_roots(T, _even_depth_roots(T, base))
    return SubtreeDecomposition(pieces, edges, beta, D, tuple(sorted(base)))


def validate_decomposition(T: Tree, dec: SubtreeDecomposition) -> list[str]:
    """Every violated invariant, as human-readable strings (empty list means ok)."""
    problems = []
    D, beta = dec.D, dec.beta
    owner = {}
    for i, (verts, _) in enumerate(dec.subtrees):
        for v in verts:
            if v in owner:
                problems.append(f"vertex {v} lies in subtrees {owner[v]} and {i}")
            owner[v] = i
    stray = sorted(v for v in owner if not 0 <= v < T.n)
    if stray:
        problems.append(f"vertices outside the tree: {stray[:10]}")
    missing = [v for v in range(T.n) if v not in owner]
    if missing:
        problems.append(f"vertices not covered: {missing[:10]}")
    if problems:
        return problems
    if dec.t > 4 * D / beta:
        problems.append(f"{dec.t} subtrees exceed 4D/beta = {4 * D / beta:g}")
    cap = D**4 * beta * T.n
    for i, (verts, root) in enumerate(dec.subtrees):
        if root not in verts:
            problems.append(f"subtree {i}: root {root} not inside")
            continue
        if len(verts) > cap:
            problems.append(f"subtree {i}: size {len(verts)} exceeds D^4*beta*|V(T)| = {cap:g}")
        for v in verts:
            if v != root and T.parent[v] not in verts:
                problems.append(f"subtree {i}: not connected below root {root} at vertex {v}")
                break
        if root != T.root and T.parent[root] in verts:
            problems.append(f"subtree {i}: root {root} is not its topmost vertex")
        if T.depth[root] % 2:
            problems.append(f"subtree {i}: root {root} at odd depth {T.depth[root]}")
        stray = [c for c in T.children[root] if c not in verts]
        if stray:
            problems.append(f"subtree {i}: children {stray} of root {root} lie elsewhere")
    actual = sorted({tuple(sorted((owner[u], owner[v]))) for u, v in T.edges() if owner[u] != owner[v]})
    declared = sorted(tuple(sorted(e)) for e in dec.cluster_edges)
    if actual != declared:
        problems.append("declared cluster tree differs from the tree-edge quotient")
    if len(actual) != dec.t - 1:
        problems.append(f"cluster graph has {len(actual)} edges, a tree on {dec.t} nodes needs {dec.t - 1}")
    deg = [0] * dec.t
    for i, j in actual:
        deg[i] += 1
        deg[j] += 1
    if deg and max(deg) > D**4:
        problems.append(f"cluster tree max degree {max(deg)} exceeds D^4 = {D**4}")
    return problems
