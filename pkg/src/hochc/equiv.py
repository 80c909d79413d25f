"""Equivalence checking for pairs of recursion schemes.

Both grammars are made ⊥-free, renamed apart and encoded into one program.
Two goals are built over it: ``eq1`` asks for equal trees generated from the
two start symbols, ``eq0`` for distinct ones.  :func:`decide_equiv` then
alternates, per scheduled depth, between

* comparing operational prefixes, whose first mismatch is an inequivalence
  witness and the practical way of answering ``eq0``;
* running the symbolic engine on ``eq1``, whose loop closure gives an
  equivalence certificate once the two rational trees are rebuilt and
  checked for bisimilarity.

Without either, the answer is UNKNOWN: no verdict is made up.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field

from .botfree import DIV, botfree_transform, fresh_name, is_bot_free
from .coengine import Status, solve
from .core import IOTA, And, AppInd, Eq, Exists, Goal, Neq, Program, Rel, Var
from .encoder import encode, relation_name
from .hors import App, AppTerm, Hors, Rule, Sym, generate_prefix, isomorphic, rational_tree
from .trees import AlphabetError, Tree, bisimulation, first_difference, prefix

DEFAULT_SCHEDULE = (2, 4, 8, 16, 32, 64)


class Outcome(enum.Enum):
    EQUIVALENT = "EQUIVALENT"
    INEQUIVALENT = "INEQUIVALENT"
    UNKNOWN = "UNKNOWN"


@dataclass
class Certificate:
    kind: str  # "syntactic-identity" or "rational-bisimulation"
    tree1: Tree | None = None
    tree2: Tree | None = None
    relation: frozenset[tuple[int, int]] = frozenset()


@dataclass
class EquivVerdict:
    outcome: Outcome
    depth: int
    path: list[int] | None = None
    label1: str | None = None
    label2: str | None = None
    certificate: Certificate | None = None
    notes: list[str] = field(default_factory=list)
    timing: dict[str, float] = field(default_factory=dict)


@dataclass
class EquivInstance:
    h1: Hors
    h2: Hors
    g1: Hors  # ⊥-free, renamed apart
    g2: Hors
    program: Program
    eq1: Goal
    eq0: Goal
    div: str


def _rename(h: Hors, renaming: dict[str, str]) -> Hors:
    if not renaming:
        return h

    def go(t: AppTerm) -> AppTerm:
        if isinstance(t, App):
            return App(go(t.fn), go(t.arg))
        return Sym(renaming.get(t.name, t.name))

    rules = {renaming.get(f, f): Rule(r.params, go(r.body)) for f, r in h.rules.items()}
    sorts = {renaming.get(f, f): s for f, s in h.nonterminals.items()}
    return Hors(h.terminals, rules, renaming.get(h.start, h.start), sorts)


def union_alphabet(h1: Hors, h2: Hors) -> dict[str, int]:
    out = dict(h1.terminals)
    for f, k in h2.terminals.items():
        if out.get(f, k) != k:
            raise AlphabetError(f"terminal {f} has arity {out[f]} and {k}")
        out[f] = k
    return out


def _rename_apart(g1: Hors, g2: Hors) -> tuple[Hors, Hors]:
    terms = set(g1.terminals) | set(g2.terminals)
    clash = (set(g1.rules) & set(g2.rules)) | (set(g1.rules) & terms) | (set(g2.rules) & terms)
    taken = set(g1.rules) | set(g2.rules) | terms
    r1, r2 = {}, {}
    for f in sorted(clash):
        if f in g1.rules:
            r1[f] = fresh_name(f + "_1", taken)
            taken.add(r1[f])
        if f in g2.rules:
            r2[f] = fresh_name(f + "_2", taken)
            taken.add(r2[f])
    return _rename(g1, r1), _rename(g2, r2)


def _pair_goal(s1: str, s2: str, cls) -> Goal:
    calls = And(AppInd(Rel(relation_name(s1)), Var("r1")), AppInd(Rel(relation_name(s2)), Var("r2")))
    return Exists("r1", IOTA, Exists("r2", IOTA, And(calls, cls(Var("r1"), Var("r2")))))


def build_instances(h1: Hors, h2: Hors, max_variants: int = 10_000) -> EquivInstance:
    alphabet = union_alphabet(h1, h2)
    names = set(alphabet) | set(h1.rules) | set(h2.rules)
    div = fresh_name(DIV, names)
    prepared = []
    for h in (h1, h2):
        h = Hors(alphabet, h.rules, h.start, h.nonterminals)
        if is_bot_free(h, max_variants=max_variants):
            prepared.append(h)
        else:
            prepared.append(botfree_transform(h, max_variants=max_variants, div=div).hors)
    # a ⊥-free grammar and a transformed one must agree on the alphabet
    full = {**alphabet, **{f: k for g in prepared for f, k in g.terminals.items()}}
    prepared = [Hors(full, g.rules, g.start, g.nonterminals) for g in prepared]
    g1, g2 = _rename_apart(*prepared)
    program = encode(g1).union(encode(g2))
    return EquivInstance(h1, h2, g1, g2, program,
                         _pair_goal(g1.start, g2.start, Eq), _pair_goal(g1.start, g2.start, Neq), div)


def _certify(inst: EquivInstance, witness1: Tree | None, witness2: Tree | None,
             depths) -> Certificate | None:
    t1 = rational_tree(inst.g1)
    t2 = rational_tree(inst.g2)
    if t1 is None or t2 is None:
        return None
    rel = bisimulation(t1, t2)
    if rel is None:
        return None
    for w in (witness1, witness2):
        if w is not None and bisimulation(w, t1) is None:
            return None
    for d in depths:
        if generate_prefix(inst.g1, d) != prefix(t1, d) or generate_prefix(inst.g2, d) != prefix(t2, d):
            return None
    return Certificate("rational-bisimulation", t1, t2, frozenset(rel))


def decide_equiv(h1: Hors, h2: Hors, schedule=DEFAULT_SCHEDULE, symbolic_eq0: bool = False,
                 max_steps: int = 200_000, max_variants: int = 10_000) -> EquivVerdict:
    schedule = sorted(set(schedule))
    if not schedule or schedule[0] < 1:
        raise ValueError("schedule must contain positive depths")
    timing = {"prefix": 0.0, "symbolic": 0.0}

    def timed(route, fn, *args, **kw):
        t0 = time.perf_counter()
        try:
            return fn(*args, **kw)
        finally:
            timing[route] += time.perf_counter() - t0

    def differ(depth):
        return timed("prefix", lambda: first_difference(generate_prefix(inst.g1, depth),
                                                        generate_prefix(inst.g2, depth), depth))

    if timed("symbolic", isomorphic, h1, h2):
        return EquivVerdict(Outcome.EQUIVALENT, 0, certificate=Certificate("syntactic-identity"), timing=timing)
    inst = build_instances(h1, h2, max_variants)
    notes: list[str] = []
    refuted_at = None
    for depth in schedule:
        diff = differ(depth)
        v = timed("symbolic", solve, inst.program, inst.eq1, depth, max_steps=max_steps)
        if diff is not None:
            # both routes ran this round; they must not both be definitive
            assert v.status is not Status.SAT, "eq1 satisfied on grammars with differing prefixes"
            path, l1, l2 = diff
            if v.status is Status.UNSAT:
                refuted_at = min(refuted_at or depth, depth)
            if refuted_at is not None:
                notes.append(f"eq1 unsatisfiable at budget {refuted_at}")
            return EquivVerdict(Outcome.INEQUIVALENT, depth, path, l1, l2, notes=notes, timing=timing)
        if v.status is Status.SAT:
            cert = timed("symbolic", _certify, inst, v.value_of("r1"), v.value_of("r2"), schedule)
            if cert is not None:
                return EquivVerdict(Outcome.EQUIVALENT, depth, certificate=cert, notes=notes, timing=timing)
            notes.append(f"eq1 loop closure at budget {depth} not certified")
        elif v.status is Status.UNSAT and refuted_at is None:
            refuted_at = depth
        if symbolic_eq0:
            w = timed("symbolic", solve, inst.program, inst.eq0, depth, max_steps=max_steps,
                      disequality_witness=True)
            if w.status is Status.SAT:
                notes.append(f"eq0 witnessed symbolically at budget {depth}")
    if refuted_at is not None:
        # the symbolic route proved the trees differ; look deeper for the position
        depth = schedule[-1]
        while depth < 64 * schedule[-1]:
            depth *= 2
            diff = differ(depth)
            if diff is not None:
                path, l1, l2 = diff
                notes.append(f"eq1 unsatisfiable at budget {refuted_at}")
                return EquivVerdict(Outcome.INEQUIVALENT, depth, path, l1, l2, notes=notes, timing=timing)
        raise AssertionError("symbolic refutation without an operational difference")
    return EquivVerdict(Outcome.UNKNOWN, schedule[-1], notes=notes, timing=timing)


def recheck(h1: Hors, h2: Hors, verdict: EquivVerdict) -> bool:
    """Re-validate a verdict's evidence from scratch."""
    if verdict.outcome is Outcome.INEQUIVALENT:
        inst = build_instances(h1, h2)
        p1 = generate_prefix(inst.g1, verdict.depth)
        p2 = generate_prefix(inst.g2, verdict.depth)
        return p1.label_at(verdict.path) == verdict.label1 and p2.label_at(verdict.path) == verdict.label2 \
            and verdict.label1 != verdict.label2
    if verdict.outcome is Outcome.EQUIVALENT:
        cert = verdict.certificate
        if cert is None:
            return False
        if cert.kind == "syntactic-identity":
            return isomorphic(h1, h2)
        return cert.tree1 is not None and bisimulation(cert.tree1, cert.tree2) is not None
    return True
