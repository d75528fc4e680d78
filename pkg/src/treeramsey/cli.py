"""Command-line front end.

Every artifact starts with ``#`` header lines that echo the command and its
numeric parameters; all parsers skip them.  Exit codes: 0 success, 1 witnessed
negative (witness file written), 2 budget or precondition failure, 3 usage.
"""

from __future__ import annotations

import argparse
import re
import sys
from itertools import combinations
from pathlib import Path

from treeramsey.bits import bits, mask_of
from treeramsey.embedder import PartialEmbedding, haxell_embed, validate_embedding
from treeramsey.errors import (
    BudgetExceeded,
    CapExceeded,
    InvalidBeta,
    InvalidDegreeBound,
    NoEmbedding,
    PreconditionBroken,
    TreeRamseyError,
)
from treeramsey.expanders import DEFAULT_BUDGET, ExpansionVerdict, check_expander, check_weak, extract_expander
from treeramsey.graph_core import ColouredGraph, GnpSpec, Graph, sample_gnp
from treeramsey.ramsey import (
    STRATEGIES,
    ArrowVerdict,
    SweepConfig,
    WeaklyCliqueOutcome,
    arrow_exhaustive,
    check_colouring,
    colouring_from_parts,
    extremal_parts,
    mc_sweep,
    random_colouring,
    rows_to_csv,
    sparse_cut_colouring,
    tree_family,
    validate_verdict,
    validate_weakly_clique,
    weakly_clique,
)
from treeramsey.trees import SubtreeDecomposition, Tree, cut_tree, gen_random_tree, path_tree, star_tree, validate_decomposition

EXIT_OK, EXIT_NEGATIVE, EXIT_BUDGET, EXIT_USAGE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def _header(command: str, **params) -> str:
    items = " ".join(f"{k}={v!r}" if isinstance(v, float) else f"{k}={v}" for k, v in params.items())
    return f"# {command} {items}".rstrip() + "\n"


def _write(path: str, text: str) -> None:
    Path(path).write_text(text)


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc


def _parse(kind, path: str):
    text = _read(path)
    try:
        return kind.from_text(text)
    except (ValueError, IndexError) as exc:
        raise UsageError(f"{path}: not a valid {kind.__name__} file ({exc})") from exc


def parse_family(spec: str, D: int | None, seed: int, samples: int) -> list[Tree]:
    """``n<k>`` is every tree with k edges (max degree <= D if given)."""
    m = re.fullmatch(r"n(\d+)", spec)
    if not m:
        raise UsageError(f"family spec {spec!r} is not of the form n<edges>")
    k = int(m.group(1))
    if k < 1:
        raise UsageError("family needs at least one edge")
    fam, _ = tree_family(k, D if D is not None else k, seed=seed, samples=samples)
    return fam


# ----------------------------------------------------------------------------
# artifact formats owned by the CLI
# ----------------------------------------------------------------------------


def arrow_verdict_text(v: ArrowVerdict) -> str:
    lines = [f"verdict {v.kind}", f"exhaustive {int(v.exhaustive)}"]
    if v.clique:
        lines.append("clique " + " ".join(map(str, v.clique)))
    if v.tree_id >= 0:
        lines.append(f"tree {v.tree_id}")
    for i, mp in enumerate(v.embeddings):
        lines.append(f"embedding {i} " + " ".join(f"{a}:{b}" for a, b in sorted(mp.items())))
    return "\n".join(lines) + "\n"


def arrow_verdict_from_text(text: str) -> ArrowVerdict:
    v = ArrowVerdict("Undecided")
    for ln in text.splitlines():
        parts = ln.split()
        if not parts or parts[0].startswith("#"):
            continue
        key, rest = parts[0], parts[1:]
        if key == "verdict":
            v.kind = rest[0]
        elif key == "exhaustive":
            v.exhaustive = rest[0] == "1"
        elif key == "clique":
            v.clique = tuple(int(x) for x in rest)
        elif key == "tree":
            v.tree_id = int(rest[0])
        elif key == "embedding":
            v.embeddings.append({int(a): int(b) for a, b in (x.split(":") for x in rest[1:])})
    return v


def outcome_text(out: WeaklyCliqueOutcome) -> str:
    lines = [f"outcome {out.kind}", f"stage {out.stage}", f"ms {out.m_s}"]
    lines += [f"param {k} {out.params[k]}" for k in sorted(out.params)]
    lines += ["set " + " ".join(map(str, s)) for s in out.sets]
    if out.kept:
        lines.append("kept " + " ".join(map(str, out.kept)))
    return "\n".join(lines) + "\n"


def outcome_from_text(text: str) -> WeaklyCliqueOutcome:
    out = WeaklyCliqueOutcome("")
    sets = []
    for ln in text.splitlines():
        parts = ln.split()
        if not parts or parts[0].startswith("#"):
            continue
        key, rest = parts[0], parts[1:]
        if key == "outcome":
            out.kind = rest[0]
        elif key == "stage":
            out.stage = int(rest[0])
        elif key == "ms":
            out.m_s = int(rest[0])
        elif key == "param":
            out.params[rest[0]] = int(rest[1])
        elif key == "set":
            sets.append(tuple(int(x) for x in rest))
        elif key == "kept":
            out.kept = tuple(int(x) for x in rest)
    out.sets = tuple(sets)
    return out


def expansion_problems(G: Graph, v: ExpansionVerdict) -> list[str]:
    """Recount a violation witness directly from the graph."""
    p = dict(v.params)
    X = mask_of(v.X)
    if v.kind == "SmallSetViolation":
        nb = G.gamma(X) & ~X
        if not 1 <= len(v.X) <= p.get("m1", p.get("m", 0)):
            return [f"|X|={len(v.X)} outside the small-set range"]
        if bin(nb).count("1") > p["D"] * len(v.X):
            return [f"|N(X)|={bin(nb).count('1')} > D|X|"]
        return []
    if v.kind == "WeakPairViolation":
        Y = mask_of(v.Y)
        out = []
        if len(v.X) != p["m1"] or len(v.Y) != p["m2"]:
            out.append("wrong set sizes")
        if X & Y:
            out.append("X and Y intersect")
        if G.e_between(X, Y):
            out.append(f"{G.e_between(X, Y)} edges between X and Y")
        return out
    if v.kind == "Certified":
        w = check_expander(G, p["m1"], p["m2"], p["D"])
        return [] if w.certified else [f"recheck found {w.kind}"]
    return [f"no witness for verdict {v.kind}"]


def arrow_witness_problems(CG: ColouredGraph, r: int, family: list[Tree]) -> list[str]:
    """A non-arrowing colouring: no blue K_{r+1} by plain enumeration, and some tree absent from red."""
    out = []
    for c in combinations(range(CG.base.n), r + 1):
        if all(CG.blue.has_edge(a, b) for a, b in combinations(c, 2)):
            out.append(f"blue clique {c}")
            break
    missing = []
    for i, T in enumerate(family):
        try:
            haxell_embed(CG.red, T)
        except NoEmbedding:
            missing.append(i)
    if not missing:
        out.append("every family tree embeds in red")
    return out


# ----------------------------------------------------------------------------
# commands
# ----------------------------------------------------------------------------


def cmd_gen_graph(a) -> int:
    if not 0 <= a.p <= 1:
        raise UsageError("p must lie in [0, 1]")
    G = sample_gnp(GnpSpec(a.N, a.p, a.seed))
    head = _header("gen-graph", N=a.N, p=a.p, seed=a.seed, colour=a.colour)
    if a.colour == "none":
        _write(a.out, head + G.to_text())
        return EXIT_OK
    if a.colour == "extremal":
        if a.r is None or a.n is None:
            raise UsageError("extremal colouring needs --r and --n")
        CG = colouring_from_parts(G, extremal_parts(a.N, a.r, a.n))
        head = head.rstrip("\n") + f" r={a.r} n={a.n}\n"
    elif a.colour == "random":
        CG = random_colouring(G, a.seed, a.blue_prob)
        head = head.rstrip("\n") + f" blue_prob={a.blue_prob!r}\n"
    else:
        if a.r is None:
            raise UsageError("sparse-cut colouring needs --r")
        CG = sparse_cut_colouring(G, a.r)
        head = head.rstrip("\n") + f" r={a.r}\n"
    _write(a.out, head + CG.to_text())
    return EXIT_OK


def cmd_gen_tree(a) -> int:
    if a.shape == "path":
        T = path_tree(a.n)
    elif a.shape == "star":
        T = star_tree(a.n)
    else:
        if a.seed is None:
            raise UsageError("random trees need --seed")
        T = gen_random_tree(a.n, a.D, a.seed)
    _write(a.out, _header("gen-tree", n=a.n, D=a.D, shape=a.shape, seed=a.seed) + T.to_text())
    return EXIT_OK


def cmd_cut_tree(a) -> int:
    T = _parse(Tree, a.tree)
    dec = cut_tree(T, a.beta, a.D)
    _write(a.out, _header("cut-tree", beta=a.beta, D=a.D, t=dec.t) + dec.to_text(T.n))
    problems = validate_decomposition(T, dec)
    for p in problems:
        print(p, file=sys.stderr)
    return EXIT_NEGATIVE if problems else EXIT_OK


def cmd_check_expander(a) -> int:
    G = _parse(Graph, a.graph)
    if a.mode == "exhaustive":
        v = check_expander(G, a.m1, a.m2, a.D, budget=a.budget)
    else:
        v = check_weak(G, a.m1, a.m2, budget=a.budget, mode=a.mode, seed=a.seed or 0)
    _write(a.out, _header("check-expander", m1=a.m1, m2=a.m2, D=a.D, mode=a.mode) + v.to_text())
    print(v.kind, file=sys.stderr)
    if v.certified:
        return EXIT_OK
    return EXIT_NEGATIVE if v.violation else EXIT_BUDGET


def cmd_extract_expander(a) -> int:
    G = _parse(Graph, a.graph)
    ext = extract_expander(G, a.m1, a.m2, a.D, budget=a.budget)
    text = _header("extract-expander", m1=a.m1, m2=a.m2, D=a.D)
    text += "kept " + " ".join(map(str, ext.kept)) + "\n"
    text += "removed " + " ".join(map(str, ext.removed)) + "\n"
    _write(a.out, text)
    return EXIT_OK


def cmd_embed(a) -> int:
    G = _parse(Graph, a.graph)
    T = _parse(Tree, a.tree)
    pin = tuple(a.pin) if a.pin else None
    head = _header("embed", budget=a.budget, pin="none" if pin is None else f"{pin[0]}:{pin[1]}")
    try:
        e = haxell_embed(G, T, pin, budget=a.budget)
    except NoEmbedding as exc:
        _write(a.out, head + f"verdict NoEmbedding\nreason {exc}\n")
        print(f"no embedding: {exc}", file=sys.stderr)
        return EXIT_NEGATIVE
    _write(a.out, head + e.to_text(Path(a.tree).name, Path(a.graph).name))
    return EXIT_OK


def cmd_arrow_check(a) -> int:
    CG = _parse(ColouredGraph, a.graph)
    fam = parse_family(a.family, a.D, a.seed or 0, a.samples)
    v = check_colouring(CG, a.r, fam, budget=a.budget)
    _write(a.out, _header("arrow-check", r=a.r, family=a.family, D=a.D) + arrow_verdict_text(v))
    print(v.kind, file=sys.stderr)
    if v.kind == "Undecided":
        return EXIT_BUDGET
    return EXIT_NEGATIVE if v.non_arrow else EXIT_OK


def cmd_arrow_exhaustive(a) -> int:
    G = _parse(Graph, a.graph)
    fam = parse_family(a.family, a.D, a.seed or 0, a.samples)
    res = arrow_exhaustive(G, a.r, fam, max_edges=a.max_edges, budget=a.budget)
    head = _header("arrow-exhaustive", r=a.r, family=a.family, D=a.D, colourings=res.colourings, survivors=res.survivors)
    _write(a.out, head + f"verdict {res.kind}\n")
    print(res.kind, file=sys.stderr)
    if res.kind == "Arrows":
        return EXIT_OK
    _write(a.witness or a.out + ".witness", head + res.witness.to_text())
    return EXIT_NEGATIVE


def cmd_weakly_clique(a) -> int:
    G = _parse(Graph, a.graph)
    out = weakly_clique(G, a.n, a.m, a.r, a.D, budget=a.budget)
    _write(a.out, _header("weakly-clique", n=a.n, m=a.m, r=a.r, D=a.D) + outcome_text(out))
    print(out.kind, file=sys.stderr)
    return EXIT_OK


def cmd_sweep(a) -> int:
    try:
        cfg = SweepConfig.load(a.config)
    except (OSError, ValueError, TypeError) as exc:
        raise UsageError(f"bad sweep config: {exc}") from exc
    if a.workers is not None:
        cfg.workers = a.workers
    _write(a.out, rows_to_csv(mc_sweep(cfg)))
    return EXIT_OK


def cmd_validate(a) -> int:
    problems: list[str] = []
    if a.what == "graph":
        _parse(Graph, a.graph)
    elif a.what == "tree":
        _parse(Tree, a.tree)
    elif a.what == "decomp":
        problems = validate_decomposition(_parse(Tree, a.tree), _parse(SubtreeDecomposition, a.artifact))
    elif a.what == "embedding":
        G, T = _parse(Graph, a.graph), _parse(Tree, a.tree)
        mapping = {}
        for ln in _read(a.artifact).splitlines():
            parts = ln.split()
            if parts and parts[0].isdigit():
                mapping[int(parts[0])] = int(parts[1])
        problems = validate_embedding(T, G, mapping)
    elif a.what == "expander":
        problems = expansion_problems(_parse(Graph, a.graph), ExpansionVerdict.from_text(_read(a.artifact)))
    elif a.what == "arrow-witness":
        CG = _parse(ColouredGraph, a.artifact)
        problems = arrow_witness_problems(CG, a.r, parse_family(a.family, a.D, a.seed or 0, a.samples))
    elif a.what == "arrow-verdict":
        CG = _parse(ColouredGraph, a.graph)
        fam = parse_family(a.family, a.D, a.seed or 0, a.samples)
        problems = validate_verdict(CG, a.r, fam, arrow_verdict_from_text(_read(a.artifact)))
    elif a.what == "weakly-clique":
        problems = validate_weakly_clique(_parse(Graph, a.graph), outcome_from_text(_read(a.artifact)))
    for p in problems:
        print(p, file=sys.stderr)
    return EXIT_NEGATIVE if problems else EXIT_OK


# ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="treeramsey", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, fn, **kw):
        p = sub.add_parser(name, **kw)
        p.set_defaults(fn=fn)
        return p

    p = add("gen-graph", cmd_gen_graph, help="sample G(N,p), optionally 2-coloured")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--colour", choices=("none",) + STRATEGIES, default="none")
    p.add_argument("--r", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--blue-prob", type=float, default=0.5)
    p.add_argument("--out", required=True)

    p = add("gen-tree", cmd_gen_tree, help="bounded-degree tree")
    p.add_argument("--n", type=int, required=True, help="number of edges")
    p.add_argument("--D", type=int, default=3)
    p.add_argument("--shape", choices=("random", "path", "star"), default="random")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)

    p = add("cut-tree", cmd_cut_tree, help="decompose a tree into small subtrees")
    p.add_argument("--tree", required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--D", type=int, required=True)
    p.add_argument("--out", required=True)

    for name, fn in (("check-expander", cmd_check_expander), ("extract-expander", cmd_extract_expander)):
        p = add(name, fn)
        p.add_argument("--graph", required=True)
        p.add_argument("--m1", type=int, required=True)
        p.add_argument("--m2", type=int, required=True)
        p.add_argument("--D", type=int, required=True)
        p.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
        p.add_argument("--out", required=True)
        if name == "check-expander":
            p.add_argument("--mode", choices=("exhaustive", "heuristic", "auto"), default="exhaustive")
            p.add_argument("--seed", type=int)

    p = add("embed", cmd_embed, help="embed a tree in a graph")
    p.add_argument("--graph", required=True)
    p.add_argument("--tree", required=True)
    p.add_argument("--pin", type=int, nargs=2, metavar=("TREE_V", "HOST_V"))
    p.add_argument("--budget", type=int, default=100_000)
    p.add_argument("--out", required=True)

    for name, fn in (("arrow-check", cmd_arrow_check), ("arrow-exhaustive", cmd_arrow_exhaustive)):
        p = add(name, fn)
        p.add_argument("--graph", required=True)
        p.add_argument("--r", type=int, required=True)
        p.add_argument("--family", required=True, help="n<edges>: all trees with that many edges")
        p.add_argument("--D", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--samples", type=int, default=32)
        p.add_argument("--budget", type=int, default=100_000)
        p.add_argument("--out", required=True)
        if name == "arrow-exhaustive":
            p.add_argument("--max-edges", type=int, default=22)
            p.add_argument("--witness", help="witness path (default: OUT.witness)")

    p = add("weakly-clique", cmd_weakly_clique, help="blue sets or a universality certificate")
    p.add_argument("--graph", required=True, help="red graph")
    for flag in ("--n", "--m", "--r", "--D"):
        p.add_argument(flag, type=int, required=True)
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    p.add_argument("--out", required=True)

    p = add("sweep", cmd_sweep, help="Monte Carlo sweep to CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", required=True)

    p = add("validate", cmd_validate, help="re-check an artifact")
    p.add_argument(
        "what",
        choices=("graph", "tree", "decomp", "embedding", "expander", "arrow-witness", "arrow-verdict", "weakly-clique"),
    )
    p.add_argument("--graph")
    p.add_argument("--tree")
    p.add_argument("--artifact")
    p.add_argument("--r", type=int)
    p.add_argument("--family")
    p.add_argument("--D", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--samples", type=int, default=32)
    return ap


_NEEDS = {
    "graph": ("graph",),
    "tree": ("tree",),
    "decomp": ("tree", "artifact"),
    "embedding": ("graph", "tree", "artifact"),
    "expander": ("graph", "artifact"),
    "arrow-witness": ("artifact", "r", "family"),
    "arrow-verdict": ("graph", "artifact", "r", "family"),
    "weakly-clique": ("graph", "artifact"),
}


def main(argv=None) -> int:
    a = build_parser().parse_args(argv)
    try:
        if a.command == "validate":
            missing = [f"--{k}" for k in _NEEDS[a.what] if getattr(a, k) is None]
            if missing:
                raise UsageError(f"validate {a.what} needs {' '.join(missing)}")
        return a.fn(a)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InvalidDegreeBound, InvalidBeta, CapExceeded) as exc:
        print(f"invalid parameters: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (BudgetExceeded, PreconditionBroken, TreeRamseyError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_BUDGET


if __name__ == "__main__":
    sys.exit(main())
