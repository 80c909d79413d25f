"""Higher-order constrained Horn clauses: sorts, goal terms, programs.

The semantics here is the monotone one, evaluated by brute force over an
explicitly finite background structure.  It is an oracle for the symbolic
engine in :mod:`hochc.coengine`, so it favours obviousness over speed.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Iterable, Mapping, Sequence, Union

from .trees import Fn, Term, Tree, Var


class SortError(TypeError):
    def __init__(self, rule: str, subterm: object, message: str):
        self.rule = rule
        self.subterm = subterm
        super().__init__(f"[{rule}] {message}: {subterm}")


class CapacityError(RuntimeError):
    pass


class EvaluationError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# sorts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Base:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Arrow:
    dom: "Sort"
    cod: "Sort"

    def __str__(self):
        d = f"({self.dom})" if isinstance(self.dom, Arrow) else str(self.dom)
        return f"{d} -> {self.cod}"


Sort = Union[Base, Arrow]
IOTA = Base("i")
O = Base("o")


def arrow(*sorts: Sort) -> Sort:
    """Right-associated arrow: ``arrow(a, b, c) == a -> (b -> c)``."""
    out = sorts[-1]
    for s in reversed(sorts[:-1]):
        out = Arrow(s, out)
    return out


def uncurry(s: Sort) -> tuple[list[Sort], Sort]:
    args = []
    while isinstance(s, Arrow):
        args.append(s.dom)
        s = s.cod
    return args, s


def is_relational(s: Sort) -> bool:
    if s == O:
        return True
    if isinstance(s, Arrow):
        return (s.dom == IOTA or is_relational(s.dom)) and is_relational(s.cod)
    return False


def order(s: Sort) -> int:
    if isinstance(s, Arrow):
        return max(order(s.dom) + 1, order(s.cod))
    return 0


# ---------------------------------------------------------------------------
# goal terms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Const:
    value: bool


@dataclass(frozen=True)
class Eq:
    lhs: Term
    rhs: Term


@dataclass(frozen=True)
class Neq:
    lhs: Term
    rhs: Term


@dataclass(frozen=True)
class Rel:
    """Occurrence of a relational variable."""
    name: str


@dataclass(frozen=True)
class And:
    left: "Goal"
    right: "Goal"


@dataclass(frozen=True)
class Or:
    left: "Goal"
    right: "Goal"


@dataclass(frozen=True)
class Exists:
    var: str
    sort: Sort
    body: "Goal"


@dataclass(frozen=True)
class Lam:
    var: str
    sort: Sort
    body: "Goal"


@dataclass(frozen=True)
class AppRel:
    fn: "Goal"
    arg: "Goal"


@dataclass(frozen=True)
class AppInd:
    fn: "Goal"
    arg: Term


Goal = Union[Const, Eq, Neq, Rel, And, Or, Exists, Lam, AppRel, AppInd]
Constraint = (Const, Eq, Neq)
TRUE = Const(True)
FALSE = Const(False)


def conj(*goals: Goal) -> Goal:
    """Right-nested conjunction, dropping ``true`` conjuncts."""
    goals = [g for g in goals if g != TRUE]
    if not goals:
        return TRUE
    out = goals[-1]
    for g in reversed(goals[:-1]):
        out = And(g, out)
    return out


def exists(names: Sequence[str], body: Goal, sort: Sort = IOTA) -> Goal:
    for n in reversed(names):
        body = Exists(n, sort, body)
    return body


def lam(binders: Sequence[tuple[str, Sort]], body: Goal) -> Goal:
    for n, s in reversed(binders):
        body = Lam(n, s, body)
    return body


def apply(head: Goal, *args: Goal | Term) -> Goal:
    """Apply ``head``; tree terms become individual arguments, goals relational ones."""
    for a in args:
        head = AppInd(head, a) if isinstance(a, (Var, Fn, Tree)) else AppRel(head, a)
    return head


def conjuncts(g: Goal) -> list[Goal]:
    if isinstance(g, And):
        return conjuncts(g.left) + conjuncts(g.right)
    return [g]


def app_spine(g: Goal) -> tuple[Goal, list]:
    args = []
    while isinstance(g, (AppRel, AppInd)):
        args.append(g.arg)
        g = g.fn
    return g, args[::-1]


@dataclass
class Program:
    env: dict[str, Sort]
    defs: dict[str, Goal]
    # set by the encoder; the symbolic engine relies on properties only
    # encoded programs have (nonemptiness of every approximant)
    encoded: bool = False

    def __post_init__(self):
        if set(self.env) != set(self.defs):
            raise ValueError("definitions and sort environment disagree on their variables")

    def union(self, other: Program) -> Program:
        clash = set(self.env) & set(other.env)
        if clash:
            raise ValueError(f"programs share variables {sorted(clash)}")
        return Program({**self.env, **other.env}, {**self.defs, **other.defs},
                       self.encoded and other.encoded)


# ---------------------------------------------------------------------------
# sort checking
# ---------------------------------------------------------------------------

def term_vars(t: Term) -> set[str]:
    if isinstance(t, Var):
        return {t.name}
    if isinstance(t, Fn):
        out = set()
        for a in t.args:
            out |= term_vars(a)
        return out
    return set()


def _check_term(env: Mapping[str, Sort], t: Term, g: Goal):
    for v in term_vars(t):
        if v not in env:
            raise SortError("GConstraint", g, f"unbound individual variable {v}")
        if env[v] != IOTA:
            raise SortError("GConstraint", g, f"{v} has sort {env[v]}, expected i")


def sort_check_goal(env: Mapping[str, Sort], g: Goal) -> Sort:
    """Sort of ``g`` under ``env`` by the goal-term rules, or :class:`SortError`."""
    if isinstance(g, Const):
        return O
    if isinstance(g, (Eq, Neq)):
        _check_term(env, g.lhs, g)
        _check_term(env, g.rhs, g)
        return O
    if isinstance(g, Rel):
        if g.name not in env:
            raise SortError("GVar", g, f"unbound variable {g.name}")
        s = env[g.name]
        if not is_relational(s):
            raise SortError("GVar", g, f"{g.name} has non-relational sort {s}")
        return s
    if isinstance(g, (And, Or)):
        for part in (g.left, g.right):
            s = sort_check_goal(env, part)
            if s != O:
                raise SortError("GCst", part, f"conjunct/disjunct has sort {s}, expected o")
        return O
    if isinstance(g, Exists):
        if not (g.sort == IOTA or is_relational(g.sort)):
            raise SortError("GEx", g, f"cannot quantify over sort {g.sort}")
        if g.var in env:
            raise SortError("GEx", g, f"bound variable {g.var} already in scope")
        s = sort_check_goal({**env, g.var: g.sort}, g.body)
        if s != O:
            raise SortError("GEx", g, f"body has sort {s}, expected o")
        return O
    if isinstance(g, Lam):
        if not (g.sort == IOTA or is_relational(g.sort)):
            raise SortError("GAbs", g, f"cannot abstract over sort {g.sort}")
        if g.var in env:
            raise SortError("GAbs", g, f"bound variable {g.var} already in scope")
        body = sort_check_goal({**env, g.var: g.sort}, g.body)
        return Arrow(g.sort, body)
    if isinstance(g, AppInd):
        fs = sort_check_goal(env, g.fn)
        if not (isinstance(fs, Arrow) and fs.dom == IOTA):
            raise SortError("GAppInd", g, f"head has sort {fs}, expected i -> rho")
        _check_term(env, g.arg, g)
        return fs.cod
    if isinstance(g, AppRel):
        fs = sort_check_goal(env, g.fn)
        if not isinstance(fs, Arrow) or fs.dom == IOTA:
            raise SortError("GAppRel", g, f"head has sort {fs}, expected a relational argument")
        a = sort_check_goal(env, g.arg)
        if a != fs.dom:
            raise SortError("GAppRel", g, f"argument has sort {a}, expected {fs.dom}")
        return fs.cod
    raise SortError("syntax", g, "not a goal term")


def check_program(p: Program) -> None:
    for name, s in p.env.items():
        if not is_relational(s):
            raise SortError("program", name, f"non-relational sort {s}")
    for name, body in p.defs.items():
        s = sort_check_goal(p.env, body)
        if s != p.env[name]:
            raise SortError("program", body, f"definition of {name} has sort {s}, declared {p.env[name]}")


# ---------------------------------------------------------------------------
# monotone semantics over a finite structure
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FnTable:
    """Element of a function domain, as an explicit table."""
    entries: tuple[tuple[Any, Any], ...]

    @cached_property
    def _lookup(self) -> dict:
        return dict(self.entries)

    def __call__(self, arg):
        return self._lookup[arg]

    def __repr__(self):
        return "{" + ", ".join(f"{a!r}: {v!r}" for a, v in self.entries) + "}"


@dataclass(frozen=True)
class FiniteStructure:
    """A finite model of the constraint language.

    ``functions`` maps each constructor to a total table on the carrier.
    Carrier elements that are :class:`Tree` values also serve as the
    interpretation of themselves when they occur as constants in terms.
    """
    carrier: tuple
    functions: Mapping[str, Mapping[tuple, Any]] = field(default_factory=dict)
    max_carrier: int = 3
    max_order: int = 2

    def __post_init__(self):
        cset = set(self.carrier)
        for f, table in self.functions.items():
            arities = {len(k) for k in table}
            if len(arities) > 1:
                raise ValueError(f"table for {f} mixes arities")
            k = arities.pop() if arities else 0
            for args in itertools.product(self.carrier, repeat=k):
                if args not in table:
                    raise ValueError(f"table for {f} undefined at {args}")
                if table[args] not in cset:
                    raise ValueError(f"table for {f} leaves the carrier at {args}")

    def __hash__(self):
        return hash(self.carrier)

    def eval_term(self, t: Term, env: Mapping[str, Any]):
        if isinstance(t, Var):
            if t.name not in env:
                raise EvaluationError(f"unbound individual variable {t.name}")
            return env[t.name]
        if isinstance(t, Fn):
            table = self.functions.get(t.sym)
            if table is None:
                raise EvaluationError(f"no interpretation for {t.sym}")
            return table[tuple(self.eval_term(a, env) for a in t.args)]
        if isinstance(t, Tree):
            if t not in self.carrier:
                raise EvaluationError(f"tree constant {t} outside the carrier")
            return t
        raise EvaluationError(f"not a term: {t!r}")


class Domains:
    """Enumerates the monotone domains over a finite structure."""

    def __init__(self, structure: FiniteStructure):
        self.structure = structure
        self._cache: dict[Sort, list] = {}

    def leq(self, s: Sort, a, b) -> bool:
        if s == O:
            return a <= b
        if s == IOTA:
            return a == b
        return all(self.leq(s.cod, a(x), b(x)) for x in self.elements(s.dom))

    def top(self, s: Sort):
        if s == O:
            return True
        if isinstance(s, Arrow):
            t = self.top(s.cod)
            return FnTable(tuple((x, t) for x in self.elements(s.dom)))
        raise ValueError(f"no top element at sort {s}")

    def bottom(self, s: Sort):
        if s == O:
            return False
        if isinstance(s, Arrow):
            b = self.bottom(s.cod)
            return FnTable(tuple((x, b) for x in self.elements(s.dom)))
        raise ValueError(f"no bottom element at sort {s}")

    def elements(self, s: Sort) -> list:
        if s in self._cache:
            return self._cache[s]
        if s == IOTA:
            out = list(self.structure.carrier)
        elif s == O:
            out = [False, True]
        else:
            if order(s) > self.structure.max_order or len(self.structure.carrier) > self.structure.max_carrier:
                raise CapacityError(
                    f"refusing to enumerate {s} over a carrier of {len(self.structure.carrier)}")
            out = self._monotone(s)
        self._cache[s] = out
        return out

    def _monotone(self, s: Arrow) -> list[FnTable]:
        dom = self.elements(s.dom)
        cod = self.elements(s.cod)
        n = len(dom)
        below = [[j for j in range(i) if self.leq(s.dom, dom[j], dom[i])] for i in range(n)]
        above = [[j for j in range(i) if self.leq(s.dom, dom[i], dom[j])] for i in range(n)]
        out = []
        chosen: list = []

        def go(i: int):
            if i == n:
                out.append(FnTable(tuple(zip(dom, chosen))))
                return
            for v in cod:
                if all(self.leq(s.cod, chosen[j], v) for j in below[i]) and \
                        all(self.leq(s.cod, v, chosen[j]) for j in above[i]):
                    chosen.append(v)
                    go(i + 1)
                    chosen.pop()

        go(0)
        return out


def _sort_of(env: Mapping[str, Sort], g: Goal) -> Sort:
    return sort_check_goal(env, g)


def eval_goal(env: Mapping[str, Sort], g: Goal, beta: Mapping[str, Any], structure: FiniteStructure,
              domains: Domains | None = None):
    """Denotation of ``g`` at valuation ``beta`` (booleans, carrier elements, tables)."""
    dom = domains or Domains(structure)

    def ev(g: Goal, sorts: Mapping[str, Sort], vals: Mapping[str, Any]):
        if isinstance(g, Const):
            return g.value
        if isinstance(g, Eq):
            return structure.eval_term(g.lhs, vals) == structure.eval_term(g.rhs, vals)
        if isinstance(g, Neq):
            return structure.eval_term(g.lhs, vals) != structure.eval_term(g.rhs, vals)
        if isinstance(g, Rel):
            if g.name not in vals:
                raise EvaluationError(f"unbound relational variable {g.name}")
            return vals[g.name]
        if isinstance(g, And):
            return min(ev(g.left, sorts, vals), ev(g.right, sorts, vals))
        if isinstance(g, Or):
            return max(ev(g.left, sorts, vals), ev(g.right, sorts, vals))
        if isinstance(g, Exists):
            inner = {**sorts, g.var: g.sort}
            return max((ev(g.body, inner, {**vals, g.var: x}) for x in dom.elements(g.sort)),
                       default=False)
        if isinstance(g, Lam):
            inner = {**sorts, g.var: g.sort}
            return FnTable(tuple((x, ev(g.body, inner, {**vals, g.var: x}))
                                 for x in dom.elements(g.sort)))
        if isinstance(g, AppInd):
            return ev(g.fn, sorts, vals)(structure.eval_term(g.arg, vals))
        if isinstance(g, AppRel):
            return ev(g.fn, sorts, vals)(ev(g.arg, sorts, vals))
        raise EvaluationError(f"not a goal term: {g!r}")

    return ev(g, dict(env), dict(beta))


Valuation = dict


def top_valuation(p: Program, structure: FiniteStructure, domains: Domains | None = None) -> Valuation:
    dom = domains or Domains(structure)
    return {r: dom.top(s) for r, s in p.env.items()}


def bottom_valuation(p: Program, structure: FiniteStructure, domains: Domains | None = None) -> Valuation:
    dom = domains or Domains(structure)
    return {r: dom.bottom(s) for r, s in p.env.items()}


def leq_valuation(p: Program, a: Valuation, b: Valuation, domains: Domains) -> bool:
    return all(domains.leq(s, a[r], b[r]) for r, s in p.env.items())


def one_step(p: Program, beta: Valuation, structure: FiniteStructure,
             domains: Domains | None = None) -> Valuation:
    dom = domains or Domains(structure)
    return {r: eval_goal(p.env, p.defs[r], beta, structure, dom) for r in p.env}


def _iterate(p: Program, start: Valuation, structure, dom) -> Valuation:
    cur = start
    while True:
        nxt = one_step(p, cur, structure, dom)
        if nxt == cur:
            return cur
        cur = nxt


def gfp(p: Program, structure: FiniteStructure, domains: Domains | None = None) -> Valuation:
    """Greatest model: iterate the one-step operator down from the top valuation."""
    dom = domains or Domains(structure)
    return _iterate(p, top_valuation(p, structure, dom), structure, dom)


def lfp(p: Program, structure: FiniteStructure, domains: Domains | None = None) -> Valuation:
    dom = domains or Domains(structure)
    return _iterate(p, bottom_valuation(p, structure, dom), structure, dom)


def all_valuations(p: Program, structure: FiniteStructure, domains: Domains | None = None) -> Iterable[Valuation]:
    dom = domains or Domains(structure)
    names = list(p.env)
    for vals in itertools.product(*(dom.elements(p.env[r]) for r in names)):
        yield dict(zip(names, vals))


def fixpoints(p: Program, structure: FiniteStructure, domains: Domains | None = None) -> list[Valuation]:
    dom = domains or Domains(structure)
    return [b for b in all_valuations(p, structure, dom) if one_step(p, b, structure, dom) == b]


class Solvability(enum.Enum):
    SOLVABLE = "SOLVABLE"
    UNSOLVABLE = "UNSOLVABLE"


def solve_coinductive(p: Program, goal: Goal, structure: FiniteStructure) -> Solvability:
    """Decide a coinductive problem over a finite structure via the greatest model."""
    s = sort_check_goal(p.env, goal)
    if s != O:
        raise SortError("goal", goal, f"goal has sort {s}, expected o")
    dom = Domains(structure)
    model = gfp(p, structure, dom)
    return Solvability.SOLVABLE if eval_goal(p.env, goal, model, structure, dom) else Solvability.UNSOLVABLE
