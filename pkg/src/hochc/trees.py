"""Finite and rational trees over a ranked alphabet.

A :class:`Tree` is a rooted, ordered, labelled term graph that may contain
back-edges.  Every tree is kept in canonical form: only nodes reachable from
the root, no two bisimilar nodes, nodes numbered breadth-first.  Structural
equality of two ``Tree`` values is therefore bisimilarity of the infinite
unfoldings.

The module also holds the quantifier-free constraint solver for the theory of
finite and infinite trees (rational unification without occurs check plus
disequations) and the ground-sort embedding pair ``i_iota`` / ``j_iota``.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union

BOT = "_bot"


class AlphabetError(ValueError):
    pass


class TreeSyntaxError(ValueError):
    pass


class Clash(Exception):
    """Raised when a constraint system equates two distinct constructors."""


@dataclass(frozen=True)
class RankedAlphabet:
    symbols: Mapping[str, int]

    def __post_init__(self):
        for name, arity in self.symbols.items():
            if arity < 0:
                raise AlphabetError(f"negative arity for {name!r}")
        if self.symbols.get(BOT, 0) != 0:
            raise AlphabetError("bottom must be nullary")

    @classmethod
    def of(cls, symbols: Mapping[str, int], with_bot: bool = False) -> RankedAlphabet:
        syms = dict(symbols)
        if with_bot:
            syms[BOT] = 0
        return cls(syms)

    def __contains__(self, name: str) -> bool:
        return name in self.symbols

    def arity(self, name: str) -> int:
        return self.symbols[name]

    def union(self, other: RankedAlphabet) -> RankedAlphabet:
        merged = dict(self.symbols)
        for name, arity in other.symbols.items():
            if merged.setdefault(name, arity) != arity:
                raise AlphabetError(f"symbol {name!r} used with arities {merged[name]} and {arity}")
        return RankedAlphabet(merged)

    def __hash__(self):
        return hash(tuple(sorted(self.symbols.items())))


def _reachable(kids: Sequence[Sequence[int]], root: int) -> list[int]:
    seen = {root}
    order = [root]
    i = 0
    while i < len(order):
        for c in kids[order[i]]:
            if c not in seen:
                seen.add(c)
                order.append(c)
        i += 1
    return order


def refine(labels: Sequence[object], kids: Sequence[Sequence[int]]) -> list[int]:
    """Coarsest stable partition of a term graph (Moore-style refinement).

    Returns a block id per node; two nodes share a block iff they are
    bisimilar.
    """
    ids: dict[object, int] = {}
    block = [ids.setdefault((lab, len(ks)), len(ids)) for lab, ks in zip(labels, kids)]
    count = len(ids)
    while True:
        sigs: dict[tuple, int] = {}
        new = [sigs.setdefault((block[n], tuple(block[c] for c in kids[n])), len(sigs))
               for n in range(len(labels))]
        if len(sigs) == count:
            return new
        block, count = new, len(sigs)


@dataclass(frozen=True)
class Tree:
    """Canonical term graph.  Build with :meth:`from_graph`, :func:`leaf` or :func:`node`."""

    labels: tuple[str, ...]
    kids: tuple[tuple[int, ...], ...]

    @classmethod
    def from_graph(cls, labels: Sequence[str], kids: Sequence[Sequence[int]], root: int = 0) -> Tree:
        order = _reachable(kids, root)
        pos = {n: i for i, n in enumerate(order)}
        labs = [labels[n] for n in order]
        ks = [[pos[c] for c in kids[n]] for n in order]
        block = refine(labs, ks)
        # BFS over the quotient gives the canonical numbering
        number: dict[int, int] = {block[0]: 0}
        rep = [0]
        i = 0
        while i < len(rep):
            for c in ks[rep[i]]:
                if block[c] not in number:
                    number[block[c]] = len(rep)
                    rep.append(c)
            i += 1
        return cls(tuple(labs[n] for n in rep),
                   tuple(tuple(number[block[c]] for c in ks[n]) for n in rep))

    @property
    def label(self) -> str:
        return self.labels[0]

    @property
    def children(self) -> tuple[Tree, ...]:
        return tuple(self.subtree_at(c) for c in self.kids[0])

    def subtree_at(self, n: int) -> Tree:
        return Tree.from_graph(self.labels, self.kids, n)

    def node_at(self, path: Iterable[int]) -> int | None:
        """Node index at a 1-based child path, or None if the path leaves the tree."""
        n = 0
        for step in path:
            if not 1 <= step <= len(self.kids[n]):
                return None
            n = self.kids[n][step - 1]
        return n

    def label_at(self, path: Iterable[int]) -> str | None:
        n = self.node_at(path)
        return None if n is None else self.labels[n]

    def subtree(self, path: Iterable[int]) -> Tree:
        n = self.node_at(path)
        if n is None:
            raise IndexError(f"no node at path {list(path)}")
        return self.subtree_at(n)

    def symbols(self) -> dict[str, int]:
        return {lab: len(ks) for lab, ks in zip(self.labels, self.kids)}

    def is_finite(self) -> bool:
        # canonical numbering is BFS, so a back- or cross-edge to an
        # ancestor shows up as a cycle in a DFS colouring
        state = [0] * len(self.labels)
        stack = [(0, iter(self.kids[0]))]
        state[0] = 1
        while stack:
            n, it = stack[-1]
            c = next(it, None)
            if c is None:
                state[n] = 2
                stack.pop()
            elif state[c] == 1:
                return False
            elif state[c] == 0:
                state[c] = 1
                stack.append((c, iter(self.kids[c])))
        return True

    def size(self) -> int:
        return len(self.labels)

    def __str__(self) -> str:
        return show_tree(self)

    def __repr__(self) -> str:
        return f"Tree({show_tree(self)!r})"


FinitePrefix = Tree


class GraphBuilder:
    """Mutable node list used while constructing a tree."""

    def __init__(self):
        self.labels: list[str] = []
        self.kids: list[list[int]] = []

    def add(self, label: str, kids: Sequence[int] = ()) -> int:
        self.labels.append(label)
        self.kids.append(list(kids))
        return len(self.labels) - 1

    def embed(self, t: Tree) -> int:
        base = len(self.labels)
        for lab, ks in zip(t.labels, t.kids):
            self.add(lab, [base + c for c in ks])
        return base

    def build(self, root: int) -> Tree:
        return Tree.from_graph(self.labels, self.kids, root)


def leaf(label: str) -> Tree:
    return Tree((label,), ((),))


def node(label: str, *children: Tree) -> Tree:
    g = GraphBuilder()
    root = g.add(label)
    g.kids[root] = [g.embed(c) for c in children]
    return g.build(root)


BOTTOM = leaf(BOT)


def unary_loop(label: str) -> Tree:
    """The infinite unary tree ``label(label(...))``."""
    return Tree((label,), ((0,),))


def spine(label: str, depth: int) -> Tree:
    """``label`` repeated ``depth`` times above a bottom leaf."""
    g = GraphBuilder()
    n = g.add(BOT)
    for _ in range(depth):
        n = g.add(label, [n])
    return g.build(n)


# ---------------------------------------------------------------------------
# text syntax
# ---------------------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(?P<name>[^\W\d][\w']*)|(?P<punct>[(),.]))")


def _tokenize(text: str) -> list[tuple[str, int]]:
    out = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise TreeSyntaxError(f"unexpected character {text[pos:].strip()[:1]!r} at column {pos + 1}")
        out.append((m.group("name") or m.group("punct"), m.start(m.lastindex)))
        pos = m.end()
    return out


def parse_tree(text: str) -> Tree:
    """Parse ``f(t1, ..., tn)``, bare nullary names and ``rec X. t`` binders."""
    toks = _tokenize(text)
    g = GraphBuilder()
    alias: dict[int, int] = {}
    i = 0

    def expect(tok):
        nonlocal i
        if i >= len(toks) or toks[i][0] != tok:
            got = toks[i][0] if i < len(toks) else "end of input"
            raise TreeSyntaxError(f"expected {tok!r}, got {got!r}")
        i += 1

    def term(env: dict[str, int]) -> int:
        nonlocal i
        if i >= len(toks):
            raise TreeSyntaxError("unexpected end of input")
        name, _ = toks[i]
        if not (name[0].isalpha() or name[0] == "_"):
            raise TreeSyntaxError(f"unexpected {name!r}")
        i += 1
        if name == "rec":
            if i >= len(toks):
                raise TreeSyntaxError("rec needs a variable")
            var = toks[i][0]
            i += 1
            expect(".")
            hole = g.add("")
            body = term({**env, var: hole})
            if body == hole or alias.get(body) == hole:
                raise TreeSyntaxError(f"unguarded recursion on {var}")
            alias[hole] = body
            return hole
        if name in env:
            return env[name]
        kids = []
        if i < len(toks) and toks[i][0] == "(":
            i += 1
            kids.append(term(env))
            while i < len(toks) and toks[i][0] == ",":
                i += 1
                kids.append(term(env))
            expect(")")
        return g.add(name, kids)

    root = term({})
    if i != len(toks):
        raise TreeSyntaxError(f"trailing input at {toks[i][0]!r}")

    def resolve(n: int) -> int:
        while n in alias:
            n = alias[n]
        return n

    kids = [[resolve(c) for c in ks] for ks in g.kids]
    return Tree.from_graph(g.labels, kids, resolve(root))


def show_tree(t: Tree) -> str:
    def go(n: int, stack: tuple[int, ...]) -> tuple[str, set[int]]:
        if n in stack:
            return f"X{n}", {n}
        parts, refs = [], set()
        for c in t.kids[n]:
            s, r = go(c, stack + (n,))
            parts.append(s)
            refs |= r
        text = t.labels[n] + (f"({', '.join(parts)})" if parts else "")
        if n in refs:
            refs.discard(n)
            text = f"rec X{n}. {text}"
        return text, refs

    return go(0, ())[0]


def render_ascii(t: Tree, max_depth: int = 64) -> str:
    """Indented one-node-per-line rendering of a (finite part of a) tree."""
    lines = []

    def go(n: int, depth: int):
        lines.append("  " * depth + t.labels[n])
        if depth < max_depth:
            for c in t.kids[n]:
                go(c, depth + 1)

    go(0, 0)
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# order, bisimilarity, prefixes
# ---------------------------------------------------------------------------

def _check_alphabet(t: Tree, alphabet: Mapping[str, int]):
    for lab, ks in zip(t.labels, t.kids):
        if lab == BOT:
            continue
        if alphabet.get(lab) != len(ks):
            raise AlphabetError(f"symbol {lab}/{len(ks)} not in alphabet")


def subtree_order(t1: Tree, t2: Tree, alphabet: Mapping[str, int] | RankedAlphabet | None = None) -> bool:
    """``t1 ⊑ t2``: t1 arises from t2 by replacing subtrees with bottom.

    Symbols of both trees are checked against ``alphabet`` (default: the
    symbols occurring in ``t2``).
    """
    if isinstance(alphabet, RankedAlphabet):
        alphabet = alphabet.symbols
    if alphabet is None:
        alphabet = t2.symbols()
    else:
        _check_alphabet(t2, alphabet)
    _check_alphabet(t1, alphabet)
    seen = set()
    todo = [(0, 0)]
    while todo:
        pair = todo.pop()
        if pair in seen:
            continue
        seen.add(pair)
        a, b = pair
        if t1.labels[a] == BOT:
            continue
        if t1.labels[a] != t2.labels[b] or len(t1.kids[a]) != len(t2.kids[b]):
            return False
        todo.extend(zip(t1.kids[a], t2.kids[b]))
    return True


def bisimulation(t1: Tree, t2: Tree) -> set[tuple[int, int]] | None:
    """The node-pair relation reachable from the roots, if it is a bisimulation."""
    rel = set()
    todo = [(0, 0)]
    while todo:
        pair = todo.pop()
        if pair in rel:
            continue
        a, b = pair
        if t1.labels[a] != t2.labels[b] or len(t1.kids[a]) != len(t2.kids[b]):
            return None
        rel.add(pair)
        todo.extend(zip(t1.kids[a], t2.kids[b]))
    return rel


def is_bisimulation(t1: Tree, t2: Tree, rel: Iterable[tuple[int, int]]) -> bool:
    rel = set(rel)
    if (0, 0) not in rel:
        return False
    for a, b in rel:
        if not (0 <= a < t1.size() and 0 <= b < t2.size()):
            return False
        if t1.labels[a] != t2.labels[b] or len(t1.kids[a]) != len(t2.kids[b]):
            return False
        if any(p not in rel for p in zip(t1.kids[a], t2.kids[b])):
            return False
    return True


def bisimilar(t1: Tree, t2: Tree) -> bool:
    """Same infinite unfolding.  Works on raw graphs too, via the pair closure."""
    return bisimulation(t1, t2) is not None


def prefix(t: Tree, depth: int) -> Tree:
    """Unfold to ``depth``; every node at depth ``depth`` becomes bottom."""
    if depth < 0:
        raise ValueError("depth must be non-negative")
    g = GraphBuilder()

    def go(n: int, d: int) -> int:
        if d == depth:
            return g.add(BOT)
        return g.add(t.labels[n], [go(c, d + 1) for c in t.kids[n]])

    return g.build(go(0, 0))


def bot_free_conversion(t: Tree, depth: int, b: str) -> Tree:
    """Replace each genuine bottom of a depth-``depth`` prefix by a b-spine.

    Bottoms at depth ``depth`` are truncation points and stay.
    """
    g = GraphBuilder()

    def go(n: int, d: int) -> int:
        if d == depth:
            return g.add(BOT)
        if t.labels[n] == BOT:
            k = g.add(BOT)
            for _ in range(depth - d):
                k = g.add(b, [k])
            return k
        return g.add(t.labels[n], [go(c, d + 1) for c in t.kids[n]])

    return g.build(go(0, 0))


def first_difference(t1: Tree, t2: Tree, depth: int | None = None) -> tuple[list[int], str, str] | None:
    """Shallowest, then leftmost, position where the labels differ.

    Only positions strictly above ``depth`` are compared, so truncation
    bottoms of depth-``depth`` prefixes never count as a difference.
    """
    seen = set()
    frontier = [((0, 0), [])]
    d = 0
    while frontier and (depth is None or d < depth):
        nxt = []
        for (a, b), path in frontier:
            if (a, b) in seen:
                continue
            seen.add((a, b))
            if t1.labels[a] != t2.labels[b] or len(t1.kids[a]) != len(t2.kids[b]):
                return path, t1.labels[a], t2.labels[b]
            for i, pair in enumerate(zip(t1.kids[a], t2.kids[b]), 1):
                nxt.append((pair, path + [i]))
        frontier = nxt
        d += 1
    return None


def order_key(t: Tree) -> tuple:
    """Deterministic total order: root symbol name, then children left to right."""
    if t.is_finite():
        def key(n):
            return (t.labels[n], tuple(key(c) for c in t.kids[n]))
        return (0, key(0))
    return (1, t.labels, t.kids)


# ---------------------------------------------------------------------------
# embedding pair at ground sort
# ---------------------------------------------------------------------------

def _carrier_alphabet(carrier: Iterable[Tree], extra: Tree | None = None) -> dict[str, int]:
    alpha: dict[str, int] = {}
    for s in list(carrier) + ([extra] if extra is not None else []):
        for lab, ar in s.symbols().items():
            if alpha.setdefault(lab, ar) != ar:
                raise AlphabetError(f"symbol {lab!r} used with two arities")
    return alpha


def i_iota(t: Tree, carrier: Iterable[Tree]) -> dict[Tree, bool]:
    """Characteristic function of the up-set ``{s | t ⊑ s}`` on ``carrier``."""
    carrier = list(carrier)
    alpha = _carrier_alphabet(carrier, t)
    return {s: subtree_order(t, s, alpha) for s in carrier}


def j_iota(p: Mapping[Tree, bool] | callable, carrier: Iterable[Tree]) -> Tree:
    """Least element satisfying ``p``, bottom when ``p`` is constantly false.

    Among several minimal elements the smallest in :func:`order_key` wins.
    """
    carrier = list(carrier)
    pred = p if callable(p) else p.__getitem__
    sat = [s for s in carrier if pred(s)]
    if not sat:
        return BOTTOM
    alpha = _carrier_alphabet(carrier)
    minimal = [m for m in sat
               if not any(s != m and subtree_order(s, m, alpha) for s in sat)]
    return min(minimal, key=order_key)


# ---------------------------------------------------------------------------
# constraint solving over rational trees
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Fn:
    sym: str
    args: tuple = ()

    def __str__(self):
        if not self.args:
            return self.sym
        return f"{self.sym}({', '.join(map(str, self.args))})"


Term = Union[Var, Fn, Tree]


class Sat(enum.Enum):
    SAT = "SAT"
    UNSAT = "UNSAT"


@dataclass
class ConstraintState:
    """Solved form: union-find over variables, one constructor per class.

    Structures may point back into their own class, which is how rational
    solutions such as ``x = a(x)`` are represented.  Treat as immutable:
    every operation returns a new state.
    """

    parent: dict[str, str] = field(default_factory=dict)
    struct: dict[str, tuple[str, tuple[str, ...]]] = field(default_factory=dict)
    diseqs: frozenset = frozenset()
    counter: int = 0

    def copy(self) -> ConstraintState:
        return ConstraintState(dict(self.parent), dict(self.struct), self.diseqs, self.counter)

    def find(self, v: str) -> str:
        p = self.parent
        while v in p:
            v = p[v]
        return v

    def fresh(self, hint: str = "u") -> str:
        self.counter += 1
        return f"_{hint}{self.counter}"

    def variables(self) -> set[str]:
        out = set(self.parent) | set(self.struct)
        for _, args in self.struct.values():
            out.update(args)
        return out

    @property
    def bindings(self) -> dict[str, Term]:
        out: dict[str, Term] = {}
        for v in sorted(self.variables()):
            r = self.find(v)
            if r in self.struct:
                sym, args = self.struct[r]
                out[v] = Fn(sym, tuple(Var(self.find(a)) for a in args))
            elif r != v:
                out[v] = Var(r)
        return out

    def is_free(self, v: str) -> bool:
        return self.find(v) not in self.struct

    # -- reading trees back out -------------------------------------------

    def _graph(self, roots: Sequence[str]) -> tuple[list, list[list[int]], list[int]]:
        index: dict[str, int] = {}
        labels: list = []
        kids: list[list[int]] = []

        def visit(v):
            r = self.find(v)
            if r in index:
                return index[r]
            index[r] = len(labels)
            labels.append(None)
            kids.append([])
            todo.append(r)
            return index[r]

        todo: list[str] = []
        root_ids = [visit(v) for v in roots]
        while todo:
            r = todo.pop()
            n = index[r]
            if r in self.struct:
                sym, args = self.struct[r]
                labels[n] = sym
                kids[n] = [visit(a) for a in args]
            else:
                labels[n] = ("?", r)
        return labels, kids, root_ids

    def resolve(self, v: str) -> Tree | None:
        """The rational tree bound to ``v``, or None if a free variable is reachable."""
        labels, kids, roots = self._graph([v])
        if any(isinstance(lab, tuple) for lab in labels):
            return None
        return Tree.from_graph(labels, kids, roots[0])

    def prefix_of(self, v: str, depth: int) -> Tree:
        """Depth-``depth`` prefix of what the solved form determines for ``v``.

        Free variables read as bottom.
        """
        labels, kids, roots = self._graph([v])
        g = GraphBuilder()

        def go(n, d):
            if d == depth or isinstance(labels[n], tuple):
                return g.add(BOT)
            return g.add(labels[n], [go(c, d + 1) for c in kids[n]])

        return g.build(go(roots[0], 0))

    def entails_equal(self, a: str, b: str) -> bool:
        """Whether ``a = b`` holds in every solution (free variables kept distinct)."""
        if self.find(a) == self.find(b):
            return True
        labels, kids, roots = self._graph([a, b])
        block = refine(labels, kids)
        return block[roots[0]] == block[roots[1]]

    def __repr__(self):
        binds = ", ".join(f"{k}={v}" for k, v in self.bindings.items())
        ds = ", ".join(" != ".join(sorted(p)) for p in self.diseqs)
        return f"ConstraintState({binds}{'; ' + ds if ds else ''})"


def _flatten(state: ConstraintState, t: Term) -> str:
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Fn):
        args = tuple(_flatten(state, a) for a in t.args)
        v = state.fresh()
        state.struct[v] = (t.sym, args)
        return v
    if isinstance(t, Tree):
        names = [state.fresh("t") for _ in t.labels]
        for n, (lab, ks) in enumerate(zip(t.labels, t.kids)):
            state.struct[names[n]] = (lab, tuple(names[c] for c in ks))
        return names[0]
    raise TypeError(f"not a tree term: {t!r}")


def _union(state: ConstraintState, a: str, b: str):
    todo = [(a, b)]
    while todo:
        x, y = todo.pop()
        x, y = state.find(x), state.find(y)
        if x == y:
            continue
        sx, sy = state.struct.get(x), state.struct.get(y)
        if sx is not None and sy is not None:
            if sx[0] != sy[0] or len(sx[1]) != len(sy[1]):
                raise Clash(f"{sx[0]}/{len(sx[1])} = {sy[0]}/{len(sy[1])}")
            todo.extend(zip(sx[1], sy[1]))
        if sx is None:
            x, y = y, x
        # x keeps its structure (if any); y is redirected to x
        state.parent[y] = x
        state.struct.pop(y, None)


def unify(eqs: Iterable[tuple[Term, Term]], state: ConstraintState | None = None) -> ConstraintState:
    """Extend ``state`` with equations; rational unification, no occurs check.

    Raises :class:`Clash` if two distinct constructors are equated.
    """
    st = ConstraintState() if state is None else state.copy()
    for lhs, rhs in eqs:
        _union(st, _flatten(st, lhs), _flatten(st, rhs))
    for pair in st.diseqs:
        a, b = tuple(pair) if len(pair) == 2 else (next(iter(pair)),) * 2
        if st.find(a) == st.find(b):
            raise Clash(f"disequation {a} != {b} violated")
    return st


def add_diseq(state: ConstraintState, lhs: Term, rhs: Term) -> ConstraintState:
    st = state.copy()
    a, b = _flatten(st, lhs), _flatten(st, rhs)
    if st.find(a) == st.find(b):
        raise Clash(f"disequation between identical terms {lhs} != {rhs}")
    st.diseqs = st.diseqs | {frozenset((a, b))}
    return st


def check_diseqs(state: ConstraintState) -> Sat:
    """SAT unless some disequation is entailed false by the solved form.

    Disequations are checked independently of each other.  A free variable
    counts as an arbitrary tree, so only sides whose term graphs are
    bisimilar with free variables kept distinct are forced equal.
    """
    for pair in state.diseqs:
        a, b = tuple(pair)
        if state.entails_equal(a, b):
            return Sat.UNSAT
    return Sat.SAT


