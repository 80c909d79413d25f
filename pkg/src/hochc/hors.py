"""Deterministic higher-order recursion schemes.

Besides the data model this module carries the divergence analysis: an
abstract interpretation over the finite flag domains (``S(i) = {0, 1}``,
full function spaces above) whose greatest fixpoint tells, for every ground
configuration, whether head reduction ever reaches a terminal.  It makes
prefix generation exact, ⊥ leaves included.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

from .core import IOTA, Arrow, CapacityError, Sort, SortError, arrow, order, uncurry
from .trees import BOT, GraphBuilder, RankedAlphabet, Tree


@dataclass(frozen=True)
class Sym:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class App:
    fn: "AppTerm"
    arg: "AppTerm"

    def __str__(self):
        head, args = spine(self)
        return " ".join([str(head)] + [f"({a})" if isinstance(a, App) else str(a) for a in args])


@dataclass(frozen=True)
class Tagged:
    """Nonterminal occurrence that may still be unfolded ``level`` times."""
    name: str
    level: int

    def __str__(self):
        return f"{self.name}^{self.level}"


AppTerm = Union[Sym, App]


def app(head: AppTerm | str, *args: AppTerm | str) -> AppTerm:
    t = Sym(head) if isinstance(head, str) else head
    for a in args:
        t = App(t, Sym(a) if isinstance(a, str) else a)
    return t


def spine(t: AppTerm) -> tuple[AppTerm, list[AppTerm]]:
    args = []
    while isinstance(t, App):
        args.append(t.arg)
        t = t.fn
    return t, args[::-1]


def symbols_of(t: AppTerm) -> set[str]:
    if isinstance(t, App):
        return symbols_of(t.fn) | symbols_of(t.arg)
    return {t.name}


def substitute(t: AppTerm, mapping: Mapping[str, object]) -> AppTerm:
    if isinstance(t, App):
        fn = substitute(t.fn, mapping)
        arg = substitute(t.arg, mapping)
        return t if fn is t.fn and arg is t.arg else App(fn, arg)
    if isinstance(t, Sym) and t.name in mapping:
        return mapping[t.name]
    return t


@dataclass(frozen=True)
class Rule:
    params: tuple[str, ...]
    body: AppTerm


@dataclass
class Hors:
    terminals: dict[str, int]
    rules: dict[str, Rule]
    start: str
    nonterminals: dict[str, Sort] = field(default_factory=dict)

    def __post_init__(self):
        self.terminals = dict(self.terminals)
        self.rules = dict(self.rules)
        inferred = infer_sorts(self.terminals, self.rules, self.nonterminals)
        self.nonterminals = {f: inferred[f] for f in self.rules}
        if self.start not in self.rules:
            raise SortError("start", self.start, "start symbol has no rule")
        if self.nonterminals[self.start] != IOTA:
            raise SortError("start", self.start, f"start symbol has sort {self.nonterminals[self.start]}")

    @property
    def alphabet(self) -> RankedAlphabet:
        return RankedAlphabet.of(self.terminals)

    def param_sorts(self, f: str) -> list[Sort]:
        return uncurry(self.nonterminals[f])[0]

    def order(self) -> int:
        return max((order(s) for s in self.nonterminals.values()), default=0)

    def with_rules(self, rules: Mapping[str, Rule], terminals: Mapping[str, int] | None = None,
                   start: str | None = None, nonterminals: Mapping[str, Sort] | None = None) -> Hors:
        return Hors(dict(self.terminals if terminals is None else terminals), dict(rules),
                    self.start if start is None else start, dict(nonterminals or {}))


# ---------------------------------------------------------------------------
# sort inference and checking
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _SVar:
    n: int


class _Unifier:
    def __init__(self):
        self.sub: dict[int, object] = {}
        self.count = 0

    def new(self):
        self.count += 1
        return _SVar(self.count)

    def walk(self, s):
        while isinstance(s, _SVar) and s.n in self.sub:
            s = self.sub[s.n]
        return s

    def occurs(self, v: _SVar, s) -> bool:
        s = self.walk(s)
        if s == v:
            return True
        return isinstance(s, Arrow) and (self.occurs(v, s.dom) or self.occurs(v, s.cod))

    def unify(self, a, b) -> bool:
        a, b = self.walk(a), self.walk(b)
        if a == b:
            return True
        if isinstance(a, _SVar):
            if self.occurs(a, b):
                return False
            self.sub[a.n] = b
            return True
        if isinstance(b, _SVar):
            return self.unify(b, a)
        if isinstance(a, Arrow) and isinstance(b, Arrow):
            return self.unify(a.dom, b.dom) and self.unify(a.cod, b.cod)
        return False

    def resolve(self, s) -> Sort:
        s = self.walk(s)
        if isinstance(s, _SVar):
            return IOTA
        if isinstance(s, Arrow):
            return Arrow(self.resolve(s.dom), self.resolve(s.cod))
        return s


def terminal_sort(k: int) -> Sort:
    return arrow(*([IOTA] * (k + 1)))


def _check_base_sorts(s: Sort, where: str):
    if isinstance(s, Arrow):
        _check_base_sorts(s.dom, where)
        _check_base_sorts(s.cod, where)
    elif s != IOTA:
        raise SortError(where, s, "recursion-scheme sorts are built from i alone")


def infer_sorts(terminals: Mapping[str, int], rules: Mapping[str, Rule],
                declared: Mapping[str, Sort] | None = None) -> dict[str, Sort]:
    """Simple-sort inference for the nonterminals; unconstrained positions default to i."""
    declared = dict(declared or {})
    for f in declared:
        if f not in rules:
            raise SortError("declaration", f, "declared nonterminal has no rule")
    u = _Unifier()
    nt: dict[str, object] = {}
    for f, rule in rules.items():
        if f in terminals:
            raise SortError(f"rule {f}", f, "nonterminal name is also a terminal")
        ps = [u.new() for _ in rule.params]
        nt[f] = arrow(*ps, IOTA) if ps else IOTA
        if f in declared:
            _check_base_sorts(declared[f], f"rule {f}")
            if not u.unify(nt[f], declared[f]):
                raise SortError(f"rule {f}", declared[f],
                                f"declared sort does not fit {len(rule.params)} parameters and a ground body")
    for f, rule in rules.items():
        if len(set(rule.params)) != len(rule.params):
            raise SortError(f"rule {f}", rule.params, "repeated parameter")
        local = {}
        s = nt[f]
        for p in rule.params:
            if p in terminals or p in rules:
                raise SortError(f"rule {f}", p, "parameter shadows a symbol")
            local[p] = s.dom
            s = s.cod

        def infer(t):
            if isinstance(t, Sym):
                if t.name in local:
                    return local[t.name]
                if t.name in nt:
                    return nt[t.name]
                if t.name in terminals:
                    return terminal_sort(terminals[t.name])
                raise SortError(f"rule {f}", t, "unknown symbol")
            fs = infer(t.fn)
            a = infer(t.arg)
            r = u.new()
            if not u.unify(fs, Arrow(a, r)):
                raise SortError(f"rule {f}", t, "ill-sorted application")
            return r

        if not u.unify(infer(rule.body), IOTA):
            raise SortError(f"rule {f}", rule.body, "body does not have sort i")
    return {f: u.resolve(s) for f, s in nt.items()}


def sort_of(h: Hors, t: AppTerm, local: Mapping[str, Sort], where: str = "term") -> Sort:
    if isinstance(t, Sym):
        if t.name in local:
            return local[t.name]
        if t.name in h.nonterminals:
            return h.nonterminals[t.name]
        if t.name in h.terminals:
            return terminal_sort(h.terminals[t.name])
        raise SortError(where, t, "unknown symbol")
    fs = sort_of(h, t.fn, local, where)
    a = sort_of(h, t.arg, local, where)
    if not isinstance(fs, Arrow) or fs.dom != a:
        raise SortError(where, t, f"cannot apply {fs} to {a}")
    return fs.cod


def sort_check_hors(h: Hors) -> None:
    for f, rule in h.rules.items():
        ps = h.param_sorts(f)
        if len(ps) != len(rule.params):
            raise SortError(f"rule {f}", f, "parameter count differs from the sort's arity")
        s = sort_of(h, rule.body, dict(zip(rule.params, ps)), f"rule {f}")
        if s != IOTA:
            raise SortError(f"rule {f}", rule.body, f"body has sort {s}, expected i")


# ---------------------------------------------------------------------------
# flag domains
# ---------------------------------------------------------------------------

def domain_size(s: Sort) -> int:
    if isinstance(s, Arrow):
        return domain_size(s.cod) ** domain_size(s.dom)
    return 2


def table_entries(s: Sort) -> int:
    """Number of ground flags stored by a tabulated value of sort ``s``."""
    n = 1
    for a in uncurry(s)[0]:
        n *= domain_size(a)
    return n


def value_index(s: Sort, v) -> int:
    if not isinstance(s, Arrow):
        return v
    radix = domain_size(s.cod)
    out = 0
    for entry in reversed(v):
        out = out * radix + value_index(s.cod, entry)
    return out


def value_at(s: Sort, idx: int):
    """Inverse of :func:`value_index`."""
    if not isinstance(s, Arrow):
        return idx
    radix = domain_size(s.cod)
    out = []
    for _ in range(domain_size(s.dom)):
        idx, r = divmod(idx, radix)
        out.append(value_at(s.cod, r))
    return tuple(out)


def constant_value(s: Sort, bit: int):
    if isinstance(s, Arrow):
        return tuple(constant_value(s.cod, bit) for _ in range(domain_size(s.dom)))
    return bit


def apply_value(s: Arrow, fn, arg):
    return fn[value_index(s.dom, arg)]


def meet_value(a, b):
    if isinstance(a, tuple):
        return tuple(meet_value(x, y) for x, y in zip(a, b))
    return min(a, b)


class FlagTable:
    """Greatest-fixpoint divergence flags of every nonterminal.

    A ground value 1 means "assumed non-productive": head reduction of the
    configuration never exposes a terminal, so it denotes ⊥.
    """

    def __init__(self, h: Hors, values: dict[str, object], transparent: frozenset[str]):
        self.h = h
        self.values = values
        self.transparent = transparent
        self._memo: dict[int, tuple[object, object, Sort]] = {}

    def __getitem__(self, f: str):
        return self.values[f]

    def ground(self, f: str, *args) -> int:
        """Flag of ``f`` applied to abstract argument values."""
        v, s = self.values[f], self.h.nonterminals[f]
        for a in args:
            v, s = apply_value(s, v, a), s.cod
        return v

    def evaluate(self, t: AppTerm, env: Mapping[str, tuple[object, Sort]] | None = None) -> tuple[object, Sort]:
        return _abstract_eval(self.h, t, self.values, env or {}, self.transparent, self._memo if not env else None)

    def flag(self, t: AppTerm) -> int:
        v, s = self.evaluate(t)
        if s != IOTA:
            raise SortError("flag", t, "flags are read at ground configurations")
        return v


def _abstract_eval(h: Hors, t, values, env, transparent, memo):
    if memo is not None and isinstance(t, App):
        hit = memo.get(id(t))
        if hit is not None and hit[0] is t:
            return hit[1], hit[2]
    if isinstance(t, Tagged):
        raise ValueError("tagged occurrences are not evaluated abstractly")
    if isinstance(t, Sym):
        if t.name in env:
            return env[t.name]
        if t.name in values:
            return values[t.name], h.nonterminals[t.name]
        k = h.terminals[t.name]
        if t.name in transparent and k == 1:
            return (0, 1), Arrow(IOTA, IOTA)
        return constant_value(terminal_sort(k), 0), terminal_sort(k)
    fv, fs = _abstract_eval(h, t.fn, values, env, transparent, memo)
    av, _ = _abstract_eval(h, t.arg, values, env, transparent, memo)
    out = apply_value(fs, fv, av), fs.cod
    if memo is not None:
        memo[id(t)] = (t, out[0], out[1])
    return out


def _tabulate(h: Hors, rule: Rule, sorts: Sequence[Sort], values, transparent):
    def go(i: int, env: dict):
        if i == len(sorts):
            v, _ = _abstract_eval(h, rule.body, values, env, transparent, None)
            return v
        return tuple(go(i + 1, {**env, rule.params[i]: (value_at(sorts[i], k), sorts[i])})
                     for k in range(domain_size(sorts[i])))
    return go(0, {})


def divergence_flags(h: Hors, transparent: Sequence[str] = (), max_entries: int = 2 ** 20) -> FlagTable:
    transparent = frozenset(transparent)
    total = sum(table_entries(s) for s in h.nonterminals.values())
    if total > max_entries:
        raise CapacityError(f"flag tables need {total} entries, bound is {max_entries}")
    values = {f: constant_value(s, 1) for f, s in h.nonterminals.items()}
    while True:
        new = {f: meet_value(values[f], _tabulate(h, rule, h.param_sorts(f), values, transparent))
               for f, rule in h.rules.items()}
        if new == values:
            return FlagTable(h, values, transparent)
        values = new


# ---------------------------------------------------------------------------
# operational semantics
# ---------------------------------------------------------------------------

class FuelExhausted(RuntimeError):
    pass


def head_step(h: Hors, t: AppTerm) -> AppTerm | None:
    """One leftmost-outermost rewrite at the head, or None if the head is a terminal."""
    head, args = spine(t)
    if isinstance(head, Sym) and head.name in h.rules:
        rule = h.rules[head.name]
        n = len(rule.params)
        body = substitute(rule.body, dict(zip(rule.params, args[:n])))
        return app(body, *args[n:])
    return None


def head_normalize(h: Hors, t: AppTerm, fuel: int = 100_000) -> AppTerm:
    for _ in range(fuel):
        nxt = head_step(h, t)
        if nxt is None:
            return t
        t = nxt
    raise FuelExhausted(f"no terminal head after {fuel} steps")


def productive_within(h: Hors, t: AppTerm, fuel: int) -> bool:
    try:
        head_normalize(h, t, fuel)
        return True
    except FuelExhausted:
        return False


def start_term(h: Hors) -> AppTerm:
    return Sym(h.start)


def generate_prefix(h: Hors, depth: int, flags: FlagTable | None = None, fuel: int = 100_000,
                    max_nodes: int = 1_000_000, root: AppTerm | None = None) -> Tree:
    """Depth-``depth`` prefix of the generated tree, with exact ⊥ placement.

    Nodes at depth ``depth`` (the root being at depth 0) are cut off and
    shown as ⊥ as well.
    """
    flags = flags or divergence_flags(h)
    g = GraphBuilder()
    count = 0

    def go(t: AppTerm, d: int) -> int:
        nonlocal count
        count += 1
        if count > max_nodes:
            raise CapacityError(f"prefix exceeds {max_nodes} nodes")
        if d >= depth or flags.flag(t) == 1:
            return g.add(BOT)
        t = head_normalize(h, t, fuel)
        head, args = spine(t)
        return g.add(head.name, [go(a, d + 1) for a in args])

    return g.build(go(root if root is not None else start_term(h), 0))


def _unfold_tagged(h: Hors, t) -> object | None:
    """Head-unfold a tagged configuration: a term, or None for ⊥."""
    while True:
        head, args = spine(t)
        if isinstance(head, Tagged):
            if head.level == 0:
                return None
            rule = h.rules[head.name]
            n = len(rule.params)
            tags = {f: Tagged(f, head.level - 1) for f in h.rules}
            body = substitute(substitute(rule.body, tags), dict(zip(rule.params, args[:n])))
            t = app(body, *args[n:])
            continue
        return t


def kleene_approximant(h: Hors, n: int, depth: int, max_nodes: int = 1_000_000) -> Tree:
    """Depth-``depth`` prefix of the ``n``-th Kleene iterate from ⊥ at the start symbol."""
    g = GraphBuilder()
    count = 0

    def go(t, d: int) -> int:
        nonlocal count
        count += 1
        if count > max_nodes:
            raise CapacityError(f"approximant exceeds {max_nodes} nodes")
        if d >= depth:
            return g.add(BOT)
        t = _unfold_tagged(h, t)
        if t is None:
            return g.add(BOT)
        head, args = spine(t)
        return g.add(head.name, [go(a, d + 1) for a in args])

    return g.build(go(Tagged(h.start, n), 0))


class Interner:
    """Hash-consing of closed terms: structurally equal terms get the same id.

    Ids are computed bottom-up over the shared term graph, so terms whose
    unfolding is exponentially large are still cheap to compare.
    """

    def __init__(self):
        self._keys: dict[tuple, int] = {}
        self._by_obj: dict[int, tuple[object, int]] = {}

    def __call__(self, t) -> int:
        hit = self._by_obj.get(id(t))
        if hit is not None and hit[0] is t:
            return hit[1]
        stack = [t]
        while stack:
            cur = stack[-1]
            hit = self._by_obj.get(id(cur))
            if hit is not None and hit[0] is cur:
                stack.pop()
                continue
            if isinstance(cur, App):
                pend = [c for c in (cur.fn, cur.arg)
                        if not ((h := self._by_obj.get(id(c))) and h[0] is c)]
                if pend:
                    stack.extend(pend)
                    continue
                key = ("app", self._by_obj[id(cur.fn)][1], self._by_obj[id(cur.arg)][1])
            else:
                key = (type(cur).__name__, cur.name, getattr(cur, "level", None))
            n = self._keys.setdefault(key, len(self._keys))
            self._by_obj[id(cur)] = (cur, n)
            stack.pop()
        return self._by_obj[id(t)][1]


def rational_tree(h: Hors, max_nodes: int = 10_000, flags: FlagTable | None = None,
                  fuel: int = 100_000) -> Tree | None:
    """The generated tree as a finite graph, if configurations repeat structurally.

    Returns None when more than ``max_nodes`` distinct configurations show
    up; that is the usual outcome for non-regular trees.
    """
    flags = flags or divergence_flags(h)
    intern = Interner()
    labels: list[str] = []
    kids: list[list[int]] = []
    seen: dict[int, int] = {}
    todo: list[tuple[AppTerm, int]] = []

    def ident(t: AppTerm) -> int:
        key = intern(t)
        if key in seen:
            return seen[key]
        if len(labels) >= max_nodes:
            raise CapacityError
        seen[key] = len(labels)
        labels.append(BOT)
        kids.append([])
        todo.append((t, seen[key]))
        return seen[key]

    try:
        ident(start_term(h))
        while todo:
            t, i = todo.pop()
            if flags.flag(t) == 1:
                continue
            head, args = spine(head_normalize(h, t, fuel))
            labels[i] = head.name
            kids[i] = [ident(a) for a in args]
    except CapacityError:
        return None
    return Tree.from_graph(labels, kids, 0)


# ---------------------------------------------------------------------------
# structural comparison
# ---------------------------------------------------------------------------

def canonical_form(h: Hors) -> tuple:
    """Rename nonterminals and parameters by first use from the start symbol."""
    names: dict[str, str] = {}
    order_: list[str] = []

    def nt(f: str) -> str:
        if f not in names:
            names[f] = f"N{len(names)}"
            order_.append(f)
        return names[f]

    def term(t: AppTerm, params: Mapping[str, str]):
        if isinstance(t, App):
            return (term(t.fn, params), term(t.arg, params))
        if t.name in params:
            return ("param", params[t.name])
        if t.name in h.rules:
            return ("nt", nt(t.name))
        return ("t", t.name, h.terminals[t.name])

    nt(h.start)
    out = []
    i = 0
    while i < len(order_):
        f = order_[i]
        rule = h.rules[f]
        params = {p: f"x{k}" for k, p in enumerate(rule.params)}
        out.append((names[f], len(rule.params), term(rule.body, params)))
        i += 1
    return tuple(out)


def isomorphic(h1: Hors, h2: Hors) -> bool:
    return canonical_form(h1) == canonical_form(h2)


def reachable(h: Hors) -> Hors:
    """Drop rules not reachable from the start symbol."""
    keep = {h.start}
    todo = [h.start]
    while todo:
        f = todo.pop()
        for s in symbols_of(h.rules[f].body):
            if s in h.rules and s not in keep:
                keep.add(s)
                todo.append(s)
    return Hors(h.terminals, {f: r for f, r in h.rules.items() if f in keep}, h.start,
                {f: s for f, s in h.nonterminals.items() if f in keep})
