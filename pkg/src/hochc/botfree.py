"""Transform a recursion scheme into one whose tree has no ⊥ leaves.

Stage 1 wraps every rule body that does not start with a terminal in a
fresh unary ``b``.  Stage 2 relabels the finite ``b`` runs to ``s`` by
specializing nonterminals on the divergence flags of their arguments, so
that each ``b`` occurrence can be classified statically.  Stage 3 replaces
``s`` by an identity nonterminal.  The result generates the tree with
every ⊥ replaced by the infinite ``b`` spine.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .core import IOTA, Arrow, CapacityError, Sort, arrow, uncurry
from .hors import (App, AppTerm, FlagTable, Hors, Rule, Sym, divergence_flags, domain_size,
                   reachable, spine, value_at, value_index)

DIV = "_div"
STEP = "_step"
IDENTITY = "I"


def fresh_name(base: str, taken) -> str:
    if base not in taken:
        return base
    for k in itertools.count(1):
        if f"{base}{k}" not in taken:
            return f"{base}{k}"


@dataclass
class Staged:
    """A staged grammar together with the fresh symbols it uses."""
    hors: Hors
    div: str
    step: str | None = None
    identity: str | None = None


def _names(h: Hors) -> set[str]:
    out = set(h.terminals) | set(h.rules)
    for r in h.rules.values():
        out |= set(r.params)
    return out


def stage1_productive(h: Hors, div: str | None = None) -> Staged:
    div = div or fresh_name(DIV, _names(h))
    rules = {}
    for f, rule in h.rules.items():
        head, _ = spine(rule.body)
        if head.name in h.terminals:
            rules[f] = rule
        else:
            rules[f] = Rule(rule.params, App(Sym(div), rule.body))
    return Staged(Hors({**h.terminals, div: 1}, rules, h.start, dict(h.nonterminals)), div)


def _families(s: Sort) -> list[tuple[int, ...]]:
    """Index tuples of the copies a parameter of sort ``s`` is split into."""
    doms = uncurry(s)[0]
    return list(itertools.product(*(range(domain_size(d)) for d in doms)))


def _expanded_sorts(s: Sort) -> list[Sort]:
    doms = uncurry(s)[0]
    return [_member_sort(s) for _ in _families(s)] if doms else [IOTA]


def _member_sort(s: Sort) -> Sort:
    doms = uncurry(s)[0]
    flat = [m for d in doms for m in _expanded_sorts(d)]
    return arrow(*flat, IOTA) if flat else IOTA


class _Specializer:
    def __init__(self, h1: Hors, div: str, step: str, flags: FlagTable, max_variants: int):
        self.h = h1
        self.div = div
        self.step = step
        self.flags = flags
        self.max_variants = max_variants
        self.taken = _names(h1) | {step}
        self.variant_names: dict[tuple[str, tuple[int, ...]], str] = {}
        self.variant_sorts: dict[str, Sort] = {}
        self.rules: dict[str, Rule] = {}
        self.todo: list[tuple[str, tuple[int, ...]]] = []

    def variant(self, f: str, kappa: tuple[int, ...]) -> str:
        key = (f, kappa)
        if key not in self.variant_names:
            if len(self.variant_names) >= self.max_variants:
                raise CapacityError(f"more than {self.max_variants} specialized variants")
            base = f if not kappa else f + "_" + "_".join(map(str, kappa))
            name = base if not kappa and f not in self.variant_sorts else fresh_name(base, self.taken)
            self.taken.add(name)
            self.variant_names[key] = name
            flat = [m for s in self.h.param_sorts(f) for m in _expanded_sorts(s)]
            self.variant_sorts[name] = arrow(*flat, IOTA) if flat else IOTA
            self.todo.append(key)
        return self.variant_names[key]

    def member(self, x: str, sort: Sort, tau: tuple[int, ...], local: dict) -> str:
        if not uncurry(sort)[0]:
            return local.setdefault((x, tau), x)
        if (x, tau) not in local:
            name = fresh_name(x + "_" + "_".join(map(str, tau)), self.taken | set(local.values()))
            local[(x, tau)] = name
        return local[(x, tau)]

    def run(self) -> dict[str, Rule]:
        self.variant(self.h.start, ())
        while self.todo:
            f, kappa = self.todo.pop(0)
            rule = self.h.rules[f]
            sorts = self.h.param_sorts(f)
            env = {x: (value_at(s, k), s) for x, s, k in zip(rule.params, sorts, kappa)}
            local: dict = {}
            params = []
            for x, s in zip(rule.params, sorts):
                if uncurry(s)[0]:
                    params += [self.member(x, s, tau, local) for tau in _families(s)]
                else:
                    params.append(self.member(x, s, (), local))
            body = self.trans(rule.body, (), env, local)
            self.rules[self.variant_names[(f, kappa)]] = Rule(tuple(params), body)
        return self.rules

    def expand_arg(self, a: AppTerm, sort: Sort, env, local) -> list[AppTerm]:
        if not uncurry(sort)[0]:
            return [self.trans(a, (), env, local)]
        return [self.trans(a, tau, env, local) for tau in _families(sort)]

    def trans(self, e: AppTerm, need: tuple[int, ...], env, local) -> AppTerm:
        head, args = spine(e)
        name = head.name
        if name == self.div and len(args) == 1 and not need:
            flag, _ = self.flags.evaluate(args[0], env)
            label = self.div if flag == 1 else self.step
            return App(Sym(label), self.trans(args[0], (), env, local))
        if name in env:
            head_sort = env[name][1]
        elif name in self.h.rules:
            head_sort = self.h.nonterminals[name]
        else:
            head_sort = None
        if head_sort is None:
            # a terminal: its arguments are ground, so nothing is specialized
            out: AppTerm = Sym(name)
            for a in args:
                out = App(out, self.trans(a, (), env, local))
            return out
        arg_sorts = uncurry(head_sort)[0]
        explicit = tuple(value_index(s, self.flags.evaluate(a, env)[0]) for a, s in zip(args, arg_sorts))
        combined = explicit + need
        if name in env:
            out = Sym(self.member(name, head_sort, combined, local))
        else:
            out = Sym(self.variant(name, combined))
        for a, s in zip(args, arg_sorts):
            for piece in self.expand_arg(a, s, env, local):
                out = App(out, piece)
        return out


def stage2_reflect(staged: Staged, step: str | None = None, max_variants: int = 10_000,
                   max_entries: int = 2 ** 20) -> Staged:
    h1 = staged.hors
    step = step or fresh_name(STEP, _names(h1))
    flags = divergence_flags(h1, transparent=[staged.div], max_entries=max_entries)
    specializer = _Specializer(h1, staged.div, step, flags, max_variants)
    rules = specializer.run()
    h2 = Hors({**h1.terminals, step: 1}, rules, h1.start, dict(specializer.variant_sorts))
    return Staged(h2, staged.div, step)


def stage3_erase(staged: Staged, identity: str | None = None) -> Staged:
    h2 = staged.hors
    ident = identity or fresh_name(IDENTITY, _names(h2))
    step = staged.step

    def erase(t: AppTerm) -> AppTerm:
        if isinstance(t, App):
            return App(erase(t.fn), erase(t.arg))
        return Sym(ident) if t.name == step else t

    rules = {f: Rule(r.params, erase(r.body)) for f, r in h2.rules.items()}
    used = any(ident in _syms(r.body) for r in rules.values())
    sorts = dict(h2.nonterminals)
    if used:
        rules[ident] = Rule(("x",), Sym("x"))
        sorts[ident] = Arrow(IOTA, IOTA)
    terminals = {f: k for f, k in h2.terminals.items() if f != step}
    h3 = reachable(Hors(terminals, rules, h2.start, sorts))
    return Staged(h3, staged.div, step, ident if used else None)


def _syms(t: AppTerm) -> set[str]:
    if isinstance(t, App):
        return _syms(t.fn) | _syms(t.arg)
    return {t.name}


def botfree_transform(h: Hors, max_variants: int = 10_000, max_entries: int = 2 ** 20,
                      div: str | None = None) -> Staged:
    s1 = stage1_productive(h, div)
    s2 = stage2_reflect(s1, max_variants=max_variants, max_entries=max_entries)
    return stage3_erase(s2)


def run_stage(h: Hors, stage: int, max_variants: int = 10_000) -> Staged:
    s = stage1_productive(h)
    if stage >= 2:
        s = stage2_reflect(s, max_variants=max_variants)
    if stage >= 3:
        s = stage3_erase(s)
    return s


def is_bot_free(h: Hors, max_variants: int = 10_000) -> bool:
    """Whether the generated tree has no ⊥ node at all."""
    s2 = stage2_reflect(stage1_productive(h), max_variants=max_variants)
    return not any(s2.div in _syms(r.body) for r in s2.hors.rules.values())
