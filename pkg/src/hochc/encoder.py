"""Encode a recursion scheme as a Horn-clause program.

Each nonterminal ``F : s`` becomes a relational variable ``R_F`` of sort
``rel_pos(s)`` whose definition is the relational lift of ``F``'s rule, written
in continuation-passing style: every ground subterm gets a result variable
``r_i`` that is constrained by a conjunct of its own.  Terminal heads are
emitted directly as tree equations.

Normalizations applied on top of the plain lift:

* true conjuncts and empty existential blocks are dropped, and nested
  existentials are hoisted to the enclosing abstraction;
* a parameter or nonterminal passed bare at a higher sort is eta-contracted
  (``phi'`` instead of ``\\y r. phi' y r``);
* a ground parameter passed directly to a terminal is used in place
  (``succ x' = r1`` rather than ``exists r2. succ r2 = r1 /\\ x' = r2``).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Mapping

from .core import (IOTA, O, And, AppInd, AppRel, Arrow, Const, Eq, Exists, Goal, Lam, Neq, Or, Program,
                   Rel, Sort, conj, conjuncts, uncurry)
from .hors import AppTerm, Hors, Sym, sort_check_hors, sort_of, spine
from .trees import Fn, Term, Tree, Var


def rel_neg(s: Sort) -> Sort:
    if isinstance(s, Arrow):
        return Arrow(rel_neg(s.dom), rel_pos(s.cod))
    return IOTA


def rel_pos(s: Sort) -> Sort:
    if isinstance(s, Arrow):
        return Arrow(rel_neg(s.dom), rel_pos(s.cod))
    return Arrow(IOTA, O)


def relation_name(f: str) -> str:
    return f"R_{f}"


def clone_name(x: str) -> str:
    return f"{x}'"


@dataclass
class _Lift:
    h: Hors
    local: dict[str, Sort]
    names: dict[str, str]
    taken: set[str]
    counter: itertools.count = field(default_factory=lambda: itertools.count(1))

    def fresh(self, base: str, numbered: bool = False) -> str:
        if numbered:
            while True:
                n = f"{base}{next(self.counter)}"
                if n not in self.taken:
                    self.taken.add(n)
                    return n
        n = base
        while n in self.taken:
            n += "'"
        self.taken.add(n)
        return n

    def fresh_y(self) -> str:
        for k in itertools.count():
            n = "y" if k == 0 else f"y{k}"
            if n not in self.taken:
                self.taken.add(n)
                return n

    def sort(self, t: AppTerm) -> Sort:
        return sort_of(self.h, t, self.local)

    def head_ref(self, name: str) -> Goal:
        if name in self.local:
            return Rel(self.names[name])
        return Rel(relation_name(name))

    def lift(self, e: AppTerm) -> Goal:
        """Relational lift of a term of any sort, as a closed-off goal."""
        s = self.sort(e)
        head, args = spine(e)
        if not args and isinstance(s, Arrow) and head.name not in self.h.terminals:
            return self.head_ref(head.name)
        ys = []
        for d in uncurry(s)[0]:
            ys.append((self.fresh_y(), rel_neg(d)))
        r = self.fresh("r")
        exs, parts = self.apply(e, [(Var(y) if d == IOTA else Rel(y)) for y, d in ys], r)
        body = Lam(r, IOTA, _exists(exs, conj(*parts)))
        for y, d in reversed(ys):
            body = Lam(y, d, body)
        return body

    def apply(self, e: AppTerm, extra: list, r: str) -> tuple[list[str], list[Goal]]:
        """Existentials and conjuncts for ``lift(e) extra r`` after beta reduction."""
        head, args = spine(e)
        name = head.name
        head_sort = self.sort(head)
        arg_sorts = uncurry(head_sort)[0]
        exs: list[str] = []
        dl: list = []
        pending: list[tuple[AppTerm, str]] = []
        terminal = name in self.h.terminals
        # result variables of ground arguments are numbered before any
        # higher-sort argument is lifted
        for a, s in zip(args, arg_sorts):
            if s != IOTA:
                dl.append(None)
            elif terminal and isinstance(a, Sym) and a.name in self.local:
                dl.append(Var(self.names[a.name]))
            else:
                ri = self.fresh("r", numbered=True)
                exs.append(ri)
                dl.append(Var(ri))
                pending.append((a, ri))
        dl = [self.lift(a) if d is None else d for a, d in zip(args, dl)]
        pieces = dl + list(extra)
        if terminal:
            head_goal: Goal = Eq(Fn(name, tuple(pieces)), Var(r))
        elif name in self.local and self.local[name] == IOTA:
            head_goal = Eq(Var(self.names[name]), Var(r))
        else:
            head_goal = self.head_ref(name)
            for p in pieces + [Var(r)]:
                head_goal = AppInd(head_goal, p) if isinstance(p, Var) else AppRel(head_goal, p)
        parts = [head_goal]
        for a, ri in pending:
            sub_exs, sub_parts = self.apply(a, [], ri)
            exs += sub_exs
            parts += sub_parts
        return exs, parts


def _exists(names: list[str], body: Goal) -> Goal:
    for n in reversed(names):
        body = Exists(n, IOTA, body)
    return body


def lift_rule(h: Hors, f: str) -> Goal:
    rule = h.rules[f]
    sorts = h.param_sorts(f)
    names = {x: clone_name(x) for x in rule.params}
    taken = set(names.values()) | {relation_name(g) for g in h.rules}
    taken |= set(h.terminals)
    lifter = _Lift(h, dict(zip(rule.params, sorts)), names, taken)
    r = lifter.fresh("r")
    exs, parts = lifter.apply(rule.body, [], r)
    body = Lam(r, IOTA, _exists(exs, conj(*parts)))
    for x, s in reversed(list(zip(rule.params, sorts))):
        body = Lam(names[x], rel_neg(s), body)
    return body


def lift_term(h: Hors, e: AppTerm, params: Mapping[str, Sort] | None = None) -> Goal:
    params = dict(params or {})
    names = {x: clone_name(x) for x in params}
    taken = set(names.values()) | {relation_name(g) for g in h.rules} | set(h.terminals)
    return _Lift(h, params, names, taken).lift(e)


def encode(h: Hors) -> Program:
    sort_check_hors(h)
    env = {relation_name(f): rel_pos(s) for f, s in h.nonterminals.items()}
    defs = {relation_name(f): lift_rule(h, f) for f in h.rules}
    return Program(env, defs, encoded=True)


# ---------------------------------------------------------------------------
# comparison up to renaming of bound variables and conjunct order
# ---------------------------------------------------------------------------

def _split(g: Goal) -> tuple[list[tuple[str, Sort]], list[Goal]]:
    exs = []
    while isinstance(g, Exists):
        exs.append((g.var, g.sort))
        g = g.body
    return exs, conjuncts(g)


class _Matcher:
    def __init__(self, ordered: bool):
        self.ordered = ordered

    def goal(self, a: Goal, b: Goal, m: dict, pend: dict) -> Iterator[tuple[dict, dict]]:
        if isinstance(a, Exists) or isinstance(b, Exists) or isinstance(a, And) or isinstance(b, And):
            ea, ca = _split(a)
            eb, cb = _split(b)
            if sorted(str(s) for _, s in ea) != sorted(str(s) for _, s in eb):
                return
            if self.ordered and [s for _, s in ea] != [s for _, s in eb]:
                return
            if len(ca) != len(cb):
                return
            p = dict(pend)
            for v, s in ea:
                p[("a", v)] = s
            for v, s in eb:
                p[("b", v)] = s
            m2 = {k: v for k, v in m.items() if k not in {x for x, _ in ea}}
            if self.ordered:
                m3 = dict(m2)
                for (va, _), (vb, _) in zip(ea, eb):
                    m3[va] = vb
                yield from self.seq(ca, cb, m3, pend)
            else:
                yield from self.multiset(ca, cb, m2, p)
            return
        if type(a) is not type(b):
            return
        if isinstance(a, Const):
            if a == b:
                yield m, pend
        elif isinstance(a, (Eq, Neq)):
            for l, r in ((b.lhs, b.rhs), (b.rhs, b.lhs)):
                for m1, p1 in self.term(a.lhs, l, m, pend):
                    yield from self.term(a.rhs, r, m1, p1)
                if self.ordered:
                    break
        elif isinstance(a, Rel):
            yield from self.name(a.name, b.name, m, pend)
        elif isinstance(a, (Lam,)):
            if a.sort != b.sort:
                return
            m1 = {**m, a.var: b.var}
            yield from self.goal(a.body, b.body, m1, pend)
        elif isinstance(a, Or):
            for m1, p1 in self.goal(a.left, b.left, m, pend):
                yield from self.goal(a.right, b.right, m1, p1)
        elif isinstance(a, AppRel):
            for m1, p1 in self.goal(a.fn, b.fn, m, pend):
                yield from self.goal(a.arg, b.arg, m1, p1)
        elif isinstance(a, AppInd):
            for m1, p1 in self.goal(a.fn, b.fn, m, pend):
                yield from self.term(a.arg, b.arg, m1, p1)

    def name(self, x: str, y: str, m: dict, pend: dict):
        if x in m:
            if m[x] == y:
                yield m, pend
            return
        if ("a", x) in pend:
            if ("b", y) in pend and pend[("a", x)] == pend[("b", y)] and y not in m.values():
                p = {k: v for k, v in pend.items() if k not in (("a", x), ("b", y))}
                yield {**m, x: y}, p
            return
        if x == y and ("b", y) not in pend and y not in m.values():
            yield m, pend

    def term(self, a: Term, b: Term, m: dict, pend: dict):
        if isinstance(a, Var) and isinstance(b, Var):
            yield from self.name(a.name, b.name, m, pend)
        elif isinstance(a, Fn) and isinstance(b, Fn):
            if a.sym != b.sym or len(a.args) != len(b.args):
                return
            yield from self.terms(list(a.args), list(b.args), m, pend)
        elif isinstance(a, Tree) and isinstance(b, Tree):
            if a == b:
                yield m, pend

    def terms(self, xs, ys, m, pend):
        if not xs:
            yield m, pend
            return
        for m1, p1 in self.term(xs[0], ys[0], m, pend):
            yield from self.terms(xs[1:], ys[1:], m1, p1)

    def seq(self, xs, ys, m, pend):
        if not xs:
            yield m, pend
            return
        for m1, p1 in self.goal(xs[0], ys[0], m, pend):
            yield from self.seq(xs[1:], ys[1:], m1, p1)

    def multiset(self, xs, ys, m, pend):
        if not xs:
            yield m, pend
            return
        for i, y in enumerate(ys):
            for m1, p1 in self.goal(xs[0], y, m, pend):
                yield from self.multiset(xs[1:], ys[:i] + ys[i + 1:], m1, p1)


def alpha_equivalent(a: Goal, b: Goal, ordered: bool = False) -> bool:
    """Equality up to bound-variable renaming; conjuncts as a multiset unless ``ordered``."""
    return next(_Matcher(ordered).goal(a, b, {}, {}), None) is not None


def programs_equivalent(p: Program, q: Program, ordered: bool = False) -> bool:
    if p.env != q.env:
        return False
    return all(alpha_equivalent(p.defs[r], q.defs[r], ordered) for r in p.env)
