"""Symbolic coinductive evaluation of Horn-clause programs over infinite trees.

A run unfolds the goal under the descending iterate ``T^n(top)``: each call
carries a level, the calls of the goal sit at level 0, and unfolding a call
at level ``k`` produces calls at level ``k + 1``.  Calls at level ``n`` are
read as ``true``.  Lambdas remember the level of the body they were created
in, so a closure applied deep inside another unfolding still refers to the
iterate it was built from.

Two outcomes are definitive:

* UNSAT when every branch clashes.  The iterates descend onto the greatest
  model, so a goal false at some iterate is false in the greatest model.
* SAT when a branch closes all its pending calls against ancestor calls,
  coinductive logic programming style.  The unified constraint store then
  describes rational trees that form a post-fixpoint.

Everything else is UNKNOWN at the given budget.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .core import (IOTA, And, AppInd, AppRel, Const, Eq, Exists, Goal, Lam, Neq, Or, Program, Rel,
                   uncurry)
from .trees import (Clash, ConstraintState, Fn, Sat, Term, Tree, Var, add_diseq, check_diseqs, unify)


class Unsupported(Exception):
    pass


@dataclass(frozen=True)
class GlobalRel:
    name: str
    level: int
    args: tuple = ()


@dataclass(frozen=True)
class Closure:
    lam: Lam
    env: tuple
    level: int
    args: tuple = ()


RelValue = GlobalRel | Closure


@dataclass(eq=False)
class Call:
    name: str
    args: tuple
    level: int
    parent: Call | None = None

    def ancestors(self) -> Iterable[Call]:
        c = self.parent
        while c is not None:
            yield c
            c = c.parent


class Status(enum.Enum):
    SAT = "SAT"
    UNSAT = "UNSAT"
    UNKNOWN = "UNKNOWN"


@dataclass
class Verdict:
    status: Status
    state: ConstraintState | None = None
    budget: int = 0
    reason: str = ""
    open_states: list[ConstraintState] = field(default_factory=list)
    bindings: dict[str, str] = field(default_factory=dict)

    def value_of(self, name: str) -> Tree | None:
        """Rational tree of a goal-level existential in the SAT witness."""
        if self.state is None or name not in self.bindings:
            return None
        return self.state.resolve(self.bindings[name])


class Membership(enum.Enum):
    YES = "YES"
    NO = "NO"
    UNKNOWN = "UNKNOWN"


def _lam_arity(g: Goal) -> int:
    n = 0
    while isinstance(g, Lam):
        n += 1
        g = g.body
    return n


class Engine:
    def __init__(self, p: Program, budget: int, close_loops: bool = True, max_steps: int = 200_000,
                 max_close_attempts: int = 5_000, disequality_witness: bool = False):
        self.p = p
        self.budget = budget
        self.close_loops = close_loops
        self.max_steps = max_steps
        self.max_close_attempts = max_close_attempts
        self.disequality_witness = disequality_witness
        self._arity = {r: len(uncurry(s)[0]) for r, s in p.env.items()}
        self._free: dict[int, frozenset[str]] = {}
        self.goal_vars: dict[str, str] = {}

    # -- evaluation -------------------------------------------------------

    def term(self, t: Term, env: Mapping[str, object]) -> Term:
        if isinstance(t, Var):
            v = env.get(t.name)
            if not isinstance(v, str):
                raise Unsupported(f"individual variable {t.name} is unbound")
            return Var(v)
        if isinstance(t, Fn):
            return Fn(t.sym, tuple(self.term(a, env) for a in t.args))
        return t

    def ground(self, t: Term, env, state: ConstraintState) -> tuple[str, ConstraintState]:
        if isinstance(t, Var):
            return self.term(t, env).name, state
        st = state.copy()
        v = st.fresh("t")
        return v, unify([(Var(v), self.term(t, env))], st)

    def value(self, g: Goal, env, level: int, state: ConstraintState) -> tuple[RelValue, ConstraintState]:
        if isinstance(g, Rel):
            if g.name in env:
                return env[g.name], state
            if g.name not in self.p.env:
                raise Unsupported(f"unbound relational variable {g.name}")
            return GlobalRel(g.name, level), state
        if isinstance(g, Lam):
            return Closure(g, tuple(sorted(((k, v) for k, v in env.items()), key=lambda kv: kv[0])), level), state
        if isinstance(g, (AppInd, AppRel)):
            fn, state = self.value(g.fn, env, level, state)
            if isinstance(g, AppInd):
                a, state = self.ground(g.arg, env, state)
            else:
                a, state = self.value(g.arg, env, level, state)
            return _with_arg(fn, a), state
        raise Unsupported(f"goal {g!r} used as a relation")

    def arity(self, v: RelValue) -> int:
        if isinstance(v, GlobalRel):
            return self._arity[v.name]
        return _lam_arity(v.lam)

    def expand(self, g: Goal, env, level: int, state: ConstraintState,
               parent: Call | None) -> list[tuple[ConstraintState, list[Call]]]:
        if isinstance(g, Const):
            return [(state, [])] if g.value else []
        if isinstance(g, Eq):
            try:
                return [(unify([(self.term(g.lhs, env), self.term(g.rhs, env))], state), [])]
            except Clash:
                return []
        if isinstance(g, Neq):
            st = state
            l, st = self.ground(g.lhs, env, st)
            r, st = self.ground(g.rhs, env, st)
            try:
                return [(add_diseq(st, Var(l), Var(r)), [])]
            except Clash:
                return []
        if isinstance(g, And):
            out = []
            for st, calls in self.expand(g.left, env, level, state, parent):
                for st2, calls2 in self.expand(g.right, env, level, st, parent):
                    out.append((st2, calls + calls2))
            return out
        if isinstance(g, Or):
            return self.expand(g.left, env, level, state, parent) + self.expand(g.right, env, level, state, parent)
        if isinstance(g, Exists):
            if g.sort != IOTA:
                raise Unsupported("existential over a relational sort")
            st = state.copy()
            v = st.fresh(g.var.rstrip("'") or "v")
            if parent is None and level == 0:
                self.goal_vars.setdefault(g.var, v)
            return self.expand(g.body, {**env, g.var: v}, level, st, parent)
        val, state = self.value(g, env, level, state)
        return self.saturate(val, state, parent)

    def saturate(self, val: RelValue, state: ConstraintState, parent: Call | None):
        if self.arity(val) != len(val.args):
            raise Unsupported("relation applied to the wrong number of arguments")
        if isinstance(val, GlobalRel):
            return [(state, [Call(val.name, val.args, val.level, parent)])]
        env = dict(val.env)
        body = val.lam
        for a in val.args:
            env[body.var] = a
            body = body.body
        return self.expand(body, env, val.level, state, parent)

    def unfold(self, c: Call, state: ConstraintState):
        body = self.p.defs[c.name]
        clo = Closure(body, (), c.level + 1, c.args)
        return self.saturate(clo, state, c)

    # -- loop closure -----------------------------------------------------

    def free_names(self, lam: Lam) -> frozenset[str]:
        key = id(lam)
        if key not in self._free:
            self._free[key] = frozenset(_free_names(lam))
        return self._free[key]

    def match(self, a, b, eqs: list) -> bool:
        """Collect equations making two argument values equal; False on a shape mismatch."""
        if isinstance(a, str) and isinstance(b, str):
            eqs.append((Var(a), Var(b)))
            return True
        if isinstance(a, GlobalRel) and isinstance(b, GlobalRel):
            return a.name == b.name and len(a.args) == len(b.args) and \
                all(self.match(x, y, eqs) for x, y in zip(a.args, b.args))
        if isinstance(a, Closure) and isinstance(b, Closure):
            if a.lam is not b.lam or len(a.args) != len(b.args):
                return False
            ea, eb = dict(a.env), dict(b.env)
            for n in self.free_names(a.lam):
                if (n in ea) != (n in eb):
                    return False
                if n in ea and not self.match(ea[n], eb[n], eqs):
                    return False
            return all(self.match(x, y, eqs) for x, y in zip(a.args, b.args))
        return False

    def try_close(self, state: ConstraintState, pending: list[Call]) -> ConstraintState | None:
        attempts = 0

        def go(i: int, st: ConstraintState) -> ConstraintState | None:
            nonlocal attempts
            if i == len(pending):
                return st if check_diseqs(st) is Sat.SAT else None
            c = pending[i]
            for anc in c.ancestors():
                if anc.name != c.name:
                    continue
                attempts += 1
                if attempts > self.max_close_attempts:
                    return None
                eqs: list = []
                if not all(self.match(x, y, eqs) for x, y in zip(c.args, anc.args)):
                    continue
                try:
                    st2 = unify(eqs, st)
                except Clash:
                    continue
                out = go(i + 1, st2)
                if out is not None:
                    return out
            return None

        for c in pending:
            if not any(a.name == c.name for a in c.ancestors()):
                return None
        return go(0, state)

    # -- driver -----------------------------------------------------------

    def run(self, goal: Goal) -> Verdict:
        try:
            configs = self.expand(goal, {}, 0, ConstraintState(), None)
        except Unsupported as e:
            return Verdict(Status.UNKNOWN, budget=self.budget, reason=str(e))
        queue = deque((st, calls) for st, calls in configs)
        steps = 0
        open_states: list[ConstraintState] = []
        exhausted = False
        while queue:
            state, pending = queue.popleft()
            if check_diseqs(state) is Sat.UNSAT:
                continue
            if self.disequality_witness and state.diseqs and _all_diseqs_forced(state):
                return Verdict(Status.SAT, state, self.budget, "disequalities forced",
                               bindings=dict(self.goal_vars))
            if not pending:
                return Verdict(Status.SAT, state, self.budget, "no pending calls",
                               bindings=dict(self.goal_vars))
            if self.close_loops:
                closed = self.try_close(state, pending)
                if closed is not None:
                    return Verdict(Status.SAT, closed, self.budget, "loops closed",
                                   bindings=dict(self.goal_vars))
            idx = next((i for i, c in enumerate(pending) if c.level < self.budget), None)
            if idx is None:
                open_states.append(state)
                continue
            steps += 1
            if steps > self.max_steps:
                exhausted = True
                break
            c = pending[idx]
            rest = pending[:idx] + pending[idx + 1:]
            try:
                succ = self.unfold(c, state)
            except Unsupported as e:
                return Verdict(Status.UNKNOWN, budget=self.budget, reason=str(e))
            for st2, calls in succ:
                queue.append((st2, rest + calls))
        if open_states or exhausted:
            reason = "step limit reached" if exhausted else "budget exhausted"
            return Verdict(Status.UNKNOWN, budget=self.budget, reason=reason, open_states=open_states,
                           bindings=dict(self.goal_vars))
        return Verdict(Status.UNSAT, budget=self.budget, reason="every branch clashes")


def _with_arg(v: RelValue, a) -> RelValue:
    if isinstance(v, GlobalRel):
        return GlobalRel(v.name, v.level, v.args + (a,))
    return Closure(v.lam, v.env, v.level, v.args + (a,))


def _term_names(t: Term) -> set[str]:
    if isinstance(t, Var):
        return {t.name}
    if isinstance(t, Fn):
        out = set()
        for a in t.args:
            out |= _term_names(a)
        return out
    return set()


def _free_names(g: Goal) -> set[str]:
    if isinstance(g, Const):
        return set()
    if isinstance(g, (Eq, Neq)):
        return _term_names(g.lhs) | _term_names(g.rhs)
    if isinstance(g, Rel):
        return {g.name}
    if isinstance(g, (And, Or)):
        return _free_names(g.left) | _free_names(g.right)
    if isinstance(g, (Exists, Lam)):
        return _free_names(g.body) - {g.var}
    if isinstance(g, AppRel):
        return _free_names(g.fn) | _free_names(g.arg)
    if isinstance(g, AppInd):
        return _free_names(g.fn) | _term_names(g.arg)
    return set()


def _all_diseqs_forced(state: ConstraintState) -> bool:
    """Every disequation holds in all solutions: equating its sides clashes."""
    for pair in state.diseqs:
        a, b = tuple(pair) if len(pair) == 2 else (next(iter(pair)),) * 2
        bare = state.copy()
        bare.diseqs = frozenset()
        try:
            unify([(Var(a), Var(b))], bare)
            return False
        except Clash:
            continue
    return True


def solve(p: Program, goal: Goal, budget: int, close_loops: bool = True, max_steps: int = 200_000,
          disequality_witness: bool = False) -> Verdict:
    """Run the symbolic engine once at a fixed unfolding budget."""
    witness = disequality_witness and p.encoded
    return Engine(p, budget, close_loops, max_steps, disequality_witness=witness).run(goal)


def solve_goal(p: Program, goal: Goal, fuel: int, schedule: Iterable[int] | None = None,
               max_steps: int = 200_000, disequality_witness: bool = False) -> Verdict:
    """Iterative deepening over budgets up to ``fuel``; stops at the first definitive verdict."""
    budgets = list(schedule) if schedule is not None else _doubling(fuel)
    last = Verdict(Status.UNKNOWN, budget=0, reason="no budget tried")
    for n in budgets:
        v = solve(p, goal, n, max_steps=max_steps, disequality_witness=disequality_witness)
        if v.status is not Status.UNKNOWN:
            return v
        last = v
        if v.reason and v.reason not in ("budget exhausted", "step limit reached"):
            return v
    return last


def _doubling(fuel: int) -> list[int]:
    out = []
    n = 1
    while n < fuel:
        out.append(n)
        n *= 2
    out.append(fuel)
    return out


def check_membership(p: Program, relation: str, t: Tree, fuel: int, max_steps: int = 200_000) -> Membership:
    """Whether ``t`` belongs to the greatest-model denotation of a relation of sort i -> o."""
    goal = AppInd(Rel(relation), t)
    v = solve_goal(p, goal, fuel, max_steps=max_steps)
    if v.status is Status.SAT:
        return Membership.YES
    if v.status is Status.UNSAT:
        return Membership.NO
    return Membership.UNKNOWN


def descend(p: Program, relation: str, budget: int, max_steps: int = 200_000) -> tuple[list[ConstraintState], str]:
    """Open states of ``relation r`` at the ``budget``-th iterate, without loop closure.

    Returns the states and the logic variable standing for ``r``.
    """
    goal = Exists("r", IOTA, AppInd(Rel(relation), Var("r")))
    eng = Engine(p, budget, close_loops=False, max_steps=max_steps)
    v = eng.run(goal)
    if v.status is Status.UNSAT:
        return [], eng.goal_vars["r"]
    if v.status is Status.SAT:
        return [v.state], eng.goal_vars["r"]
    return v.open_states, eng.goal_vars["r"]
