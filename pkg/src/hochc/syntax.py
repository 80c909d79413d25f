"""Text formats for recursion schemes and Horn-clause programs.

Recursion schemes::

    terminals:
      cons: 2
      succ: 1
      zero: 0
    nonterminals:          # optional, sorts are inferred otherwise
      B : (i -> i) -> (i -> i) -> i -> i
    start: S
    rules:
      S = F succ
      F phi = cons (phi zero) (F (B phi phi))
      B phi psi x = phi (psi x)

Programs::

    R_S : i -> o
    R_S = \\r. exists r1. (a r1 = r) /\\ R_S r1
    goal: R_S {rec X. a(X)}

Tree constants are written in braces using the tree syntax of
:func:`hochc.trees.parse_tree`.
``#`` starts a comment in both formats.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping

from .core import (IOTA, O, And, AppInd, AppRel, Arrow, Const, Eq, Exists, Goal, Lam, Neq, Or,
                   Program, Rel, Sort, SortError, Var)
from .hors import App, AppTerm, Hors, Rule, Sym, spine
from .trees import Fn, Tree, TreeSyntaxError, parse_tree, show_tree


class ParseError(ValueError):
    def __init__(self, message: str, line: int, col: int = 1):
        self.line = line
        self.col = col
        super().__init__(f"line {line}, column {col}: {message}")


_NAME = r"[^\W\d][\w']*"
_TOKEN = re.compile(r"\s*(?:(?P<name>" + _NAME + r")|(?P<num>\d+)|(?P<tree>\{[^{}]*\})|(?P<punct>->|!=|/\\|\\/|\\|[()=:.,]))")


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokens(text: str, line: int, col0: int = 1) -> list[_Tok]:
    out = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            start = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise ParseError(f"unexpected character {text[start]!r}", line, col0 + start)
        kind = m.lastgroup
        out.append(_Tok(kind, m.group(kind), line, col0 + m.start(kind)))
        pos = m.end()
    return out


class _Stream:
    def __init__(self, toks: list[_Tok], line: int):
        self.toks = toks
        self.i = 0
        self.line = line

    def peek(self, k: int = 0) -> _Tok | None:
        return self.toks[self.i + k] if self.i + k < len(self.toks) else None

    def next(self) -> _Tok:
        t = self.peek()
        if t is None:
            raise ParseError("unexpected end of line", self.line, 10 ** 6)
        self.i += 1
        return t

    def expect(self, text: str) -> _Tok:
        t = self.peek()
        if t is None or t.text != text:
            where = t.col if t else 1
            raise ParseError(f"expected {text!r}", self.line, where)
        self.i += 1
        return t

    def at(self, text: str) -> bool:
        t = self.peek()
        return t is not None and t.text == text and t.kind == "punct"

    def done(self) -> bool:
        return self.i >= len(self.toks)

    def fail_trailing(self):
        if not self.done():
            t = self.peek()
            raise ParseError(f"unexpected {t.text!r}", t.line, t.col)


def _strip_comment(line: str) -> str:
    i = line.find("#")
    return line if i < 0 else line[:i]


# ---------------------------------------------------------------------------
# sorts
# ---------------------------------------------------------------------------

def _sort(s: _Stream) -> Sort:
    t = s.next()
    if t.text == "(":
        left = _sort(s)
        s.expect(")")
    elif t.text in ("i", "o"):
        left = IOTA if t.text == "i" else O
    else:
        raise ParseError(f"expected a sort, found {t.text!r}", t.line, t.col)
    if s.at("->"):
        s.next()
        return Arrow(left, _sort(s))
    return left


def parse_sort(text: str) -> Sort:
    s = _Stream(_tokens(text, 1), 1)
    out = _sort(s)
    s.fail_trailing()
    return out


def show_sort(s: Sort) -> str:
    return str(s)


# ---------------------------------------------------------------------------
# recursion schemes
# ---------------------------------------------------------------------------

def _app_term(s: _Stream) -> AppTerm:
    parts = []
    while not s.done() and not s.at(")"):
        t = s.next()
        if t.text == "(":
            parts.append(_app_term(s))
            s.expect(")")
        elif t.kind == "name":
            parts.append(Sym(t.text))
        else:
            raise ParseError(f"unexpected {t.text!r} in a term", t.line, t.col)
    if not parts:
        raise ParseError("empty term", s.line, (s.peek().col if s.peek() else 1))
    out = parts[0]
    for p in parts[1:]:
        out = App(out, p)
    return out


def parse_app_term(text: str, line: int = 1) -> AppTerm:
    s = _Stream(_tokens(text, line), line)
    t = _app_term(s)
    s.fail_trailing()
    return t


_SECTIONS = ("terminals", "nonterminals", "start", "rules")


def parse_hors(text: str) -> Hors:
    terminals: dict[str, int] = {}
    declared: dict[str, Sort] = {}
    rules: dict[str, Rule] = {}
    start = None
    section = None
    seen_sections: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = _strip_comment(raw)
        if not line.strip():
            continue
        head = re.match(r"\s*(terminals|nonterminals|start|rules)\s*:(.*)$", line)
        if head and head.group(1) in _SECTIONS:
            section = head.group(1)
            if section in seen_sections:
                raise ParseError(f"section {section!r} given twice", lineno)
            seen_sections.add(section)
            rest = head.group(2)
            col = head.start(2) + 1
            if section == "start":
                toks = _tokens(rest, lineno, col)
                if len(toks) != 1 or toks[0].kind != "name":
                    raise ParseError("start expects one nonterminal name", lineno, col)
                start = toks[0].text
                section = None
                continue
            if not rest.strip():
                continue
            line, offset = rest, col
        else:
            offset = 1
        if section is None:
            raise ParseError("content outside of a section", lineno)
        if section == "terminals":
            for m in re.finditer(r"([^,]+)", line):
                item = m.group(1)
                if not item.strip():
                    continue
                mm = re.fullmatch(r"\s*(" + _NAME + r")\s*:\s*(\d+)\s*", item)
                if not mm:
                    raise ParseError("expected 'name: arity'", lineno, offset + m.start(1))
                name = mm.group(1)
                if name in terminals:
                    raise ParseError(f"terminal {name!r} declared twice", lineno, offset + m.start(1))
                terminals[name] = int(mm.group(2))
        elif section == "nonterminals":
            mm = re.fullmatch(r"\s*(" + _NAME + r")\s*:(.*)", line)
            if not mm:
                raise ParseError("expected 'Name : sort'", lineno, offset)
            s = _Stream(_tokens(mm.group(2), lineno, offset + mm.start(2)), lineno)
            declared[mm.group(1)] = _sort(s)
            s.fail_trailing()
        else:
            if "=" not in line:
                raise ParseError("expected 'F x1 .. xn = body'", lineno, offset)
            lhs, rhs = line.split("=", 1)
            names = _tokens(lhs, lineno, offset)
            if not names or any(t.kind != "name" for t in names):
                raise ParseError("left-hand side must be a nonterminal and parameter names", lineno, offset)
            f = names[0].text
            if f in rules:
                raise ParseError(f"second rule for {f!r}", lineno, names[0].col)
            body = parse_app_term(rhs, lineno) if rhs.strip() else None
            if body is None:
                raise ParseError("empty rule body", lineno, offset + len(lhs) + 1)
            rules[f] = Rule(tuple(t.text for t in names[1:]), body)
    if not rules:
        raise ParseError("no rules", max(1, len(text.splitlines())))
    if start is None:
        start = next(iter(rules))
    return Hors(terminals, rules, start, declared)


def _show_app(t: AppTerm, nested: bool = False) -> str:
    if isinstance(t, Sym):
        return t.name
    head, args = spine(t)
    s = " ".join([_show_app(head, True)] + [_show_app(a, True) for a in args])
    return f"({s})" if nested else s


def print_hors(h: Hors, declare: bool = True) -> str:
    out = ["terminals:"]
    out += [f"  {f}: {k}" for f, k in h.terminals.items()]
    if declare:
        out.append("nonterminals:")
        out += [f"  {f} : {s}" for f, s in h.nonterminals.items()]
    out.append(f"start: {h.start}")
    out.append("rules:")
    for f, rule in h.rules.items():
        out.append("  " + " ".join([f, *rule.params, "=", _show_app(rule.body)]))
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Horn-clause programs
# ---------------------------------------------------------------------------

@dataclass
class _RName:
    name: str
    tok: _Tok


@dataclass
class _RApp:
    head: object
    args: list


@dataclass
class _RBind:
    kind: str  # "lam" or "exists"
    binders: list[tuple[str, Sort | None]]
    body: object
    tok: _Tok


@dataclass
class _RBin:
    op: str
    left: object
    right: object
    tok: _Tok


@dataclass
class _RConst:
    value: bool


@dataclass
class _RTree:
    tree: Tree


def _r_goal(s: _Stream):
    left = _r_conj(s)
    if s.at("\\/"):
        tok = s.next()
        return _RBin("or", left, _r_goal(s), tok)
    return left


def _r_conj(s: _Stream):
    left = _r_cmp(s)
    if s.at("/\\"):
        tok = s.next()
        return _RBin("and", left, _r_conj(s), tok)
    return left


def _r_cmp(s: _Stream):
    t = s.peek()
    if t is not None and (t.text == "\\" or (t.kind == "name" and t.text == "exists")):
        return _r_binder(s)
    left = _r_app(s)
    if s.at("=") or s.at("!="):
        tok = s.next()
        return _RBin("eq" if tok.text == "=" else "neq", left, _r_app(s), tok)
    return left


def _r_binder(s: _Stream):
    tok = s.next()
    binders = []
    while not s.at("."):
        t = s.next()
        if t.text == "(":
            name = s.next()
            if name.kind != "name":
                raise ParseError("expected a binder name", name.line, name.col)
            s.expect(":")
            sort = _sort(s)
            s.expect(")")
            binders.append((name.text, sort))
        elif t.kind == "name":
            binders.append((t.text, None))
        else:
            raise ParseError(f"unexpected {t.text!r} in binder list", t.line, t.col)
    s.expect(".")
    if not binders:
        raise ParseError("binder without variables", tok.line, tok.col)
    return _RBind("lam" if tok.text == "\\" else "exists", binders, _r_goal(s), tok)


_STOP = {")", "=", "!=", "/\\", "\\/", "."}


def _r_app(s: _Stream):
    atoms = []
    while not s.done() and not (s.peek().kind == "punct" and s.peek().text in _STOP):
        t = s.peek()
        if t.text == "\\" or (t.kind == "name" and t.text == "exists"):
            break
        s.next()
        if t.text == "(":
            atoms.append(_r_goal(s))
            s.expect(")")
        elif t.kind == "tree":
            try:
                atoms.append(_RTree(parse_tree(t.text[1:-1])))
            except TreeSyntaxError as e:
                raise ParseError(f"bad tree constant: {e}", t.line, t.col) from None
        elif t.kind == "name" and t.text in ("true", "false"):
            atoms.append(_RConst(t.text == "true"))
        elif t.kind == "name":
            atoms.append(_RName(t.text, t))
        else:
            raise ParseError(f"unexpected {t.text!r}", t.line, t.col)
    if not atoms:
        t = s.peek()
        raise ParseError("expected a goal", s.line, t.col if t else 10 ** 6)
    if len(atoms) == 1:
        return atoms[0]
    return _RApp(atoms[0], atoms[1:])


def _pos(r) -> tuple[int, int]:
    tok = getattr(r, "tok", None)
    if tok is None and isinstance(r, _RApp):
        return _pos(r.head)
    return (tok.line, tok.col) if tok else (0, 0)


class _Elaborator:
    def __init__(self, env: Mapping[str, Sort]):
        self.env = dict(env)

    def term(self, r, scope: dict[str, Sort]):
        if isinstance(r, _RTree):
            return r.tree
        if isinstance(r, _RName):
            if r.name in scope or r.name in self.env:
                s = scope.get(r.name, self.env.get(r.name))
                if s != IOTA:
                    raise SortError("GConstraint", r.name, f"{r.name} has sort {s}, not i")
                return Var(r.name)
            return Fn(r.name, ())
        if isinstance(r, _RApp) and isinstance(r.head, _RName):
            if r.head.name in scope or r.head.name in self.env:
                raise SortError("GConstraint", r.head.name, "variables cannot be applied inside a tree term")
            return Fn(r.head.name, tuple(self.term(a, scope) for a in r.args))
        line, col = _pos(r)
        raise ParseError("expected a tree term", line, col)

    def goal(self, r, scope: dict[str, Sort], expected: Sort | None = None) -> tuple[Goal, Sort]:
        if isinstance(r, _RConst):
            return Const(r.value), O
        if isinstance(r, _RName):
            s = scope.get(r.name, self.env.get(r.name))
            if s is None:
                raise SortError("GVar", r.name, f"unbound relational variable {r.name}")
            return Rel(r.name), s
        if isinstance(r, _RBin):
            if r.op in ("eq", "neq"):
                cls = Eq if r.op == "eq" else Neq
                return cls(self.term(r.left, scope), self.term(r.right, scope)), O
            l, _ = self.goal(r.left, scope, O)
            rr, _ = self.goal(r.right, scope, O)
            return (And if r.op == "and" else Or)(l, rr), O
        if isinstance(r, _RBind):
            if r.kind == "exists":
                inner = dict(scope)
                sorts = []
                for name, s in r.binders:
                    s = s or IOTA
                    inner[name] = s
                    sorts.append(s)
                body, _ = self.goal(r.body, inner, O)
                for (name, _), s in reversed(list(zip(r.binders, sorts))):
                    body = Exists(name, s, body)
                return body, O
            inner = dict(scope)
            sorts = []
            exp = expected
            for name, s in r.binders:
                if s is None:
                    s = exp.dom if isinstance(exp, Arrow) else IOTA
                exp = exp.cod if isinstance(exp, Arrow) else None
                inner[name] = s
                sorts.append(s)
            body, bs = self.goal(r.body, inner, exp)
            out_sort = bs
            for (name, _), s in reversed(list(zip(r.binders, sorts))):
                body = Lam(name, s, body)
                out_sort = Arrow(s, out_sort)
            return body, out_sort
        if isinstance(r, _RApp):
            g, s = self.goal(r.head, scope)
            for a in r.args:
                if not isinstance(s, Arrow):
                    line, col = _pos(r)
                    raise SortError("GAppRel", r, f"cannot apply a goal of sort {s} (line {line})")
                if s.dom == IOTA:
                    g = AppInd(g, self.term(a, scope))
                else:
                    ag, _ = self.goal(a, scope, s.dom)
                    g = AppRel(g, ag)
                s = s.cod
            return g, s
        if isinstance(r, _RTree):
            raise SortError("GVar", r.tree, "a tree constant is not a goal")
        raise ParseError("unrecognised goal", 0, 0)


def parse_goal(text: str, env: Mapping[str, Sort] | None = None, expected: Sort | None = O,
               line: int = 1) -> Goal:
    s = _Stream(_tokens(text, line), line)
    raw = _r_goal(s)
    s.fail_trailing()
    g, got = _Elaborator(env or {}).goal(raw, {}, expected)
    if expected is not None and got != expected:
        raise SortError("Goal", text.strip(), f"expected sort {show_sort(expected)}, got {show_sort(got)}")
    return g


@dataclass
class ProgramText:
    program: Program
    goal: Goal | None


def parse_program(text: str) -> ProgramText:
    items: list[tuple[int, str]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = _strip_comment(raw)
        if not line.strip():
            continue
        if line[0].isspace():
            if not items:
                raise ParseError("continuation line before any item", lineno)
            items[-1] = (items[-1][0], items[-1][1] + " " + line.strip())
        else:
            items.append((lineno, line.strip()))
    env: dict[str, Sort] = {}
    bodies: dict[str, tuple[int, str]] = {}
    goal_text = None
    for lineno, item in items:
        mm = re.match(r"goal\s*:(.*)$", item)
        if mm:
            if goal_text is not None:
                raise ParseError("second goal", lineno)
            goal_text = (lineno, mm.group(1))
            continue
        mm = re.match(r"(" + _NAME + r")\s*(:|=)(.*)$", item)
        if not mm:
            raise ParseError("expected 'R : sort', 'R = goal' or 'goal: G'", lineno)
        name, op, rest = mm.groups()
        if op == ":":
            if name in env:
                raise ParseError(f"{name} declared twice", lineno)
            env[name] = parse_sort(rest)
        else:
            if name in bodies:
                raise ParseError(f"{name} defined twice", lineno)
            bodies[name] = (lineno, rest)
    for name, (lineno, _) in bodies.items():
        if name not in env:
            raise ParseError(f"{name} is defined but not declared", lineno)
    for name in env:
        if name not in bodies:
            raise ParseError(f"{name} is declared but not defined", 1)
    defs = {name: parse_goal(body, env, env[name], lineno) for name, (lineno, body) in bodies.items()}
    goal = parse_goal(goal_text[1], env, O, goal_text[0]) if goal_text else None
    return ProgramText(Program(env, defs), goal)


def show_term(t, nested: bool = False) -> str:
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Tree):
        return "{" + show_tree(t) + "}"
    if not t.args:
        return t.sym
    s = " ".join([t.sym] + [show_term(a, True) for a in t.args])
    return f"({s})" if nested else s


def _binder(name: str, s: Sort, annotate: bool) -> str:
    return f"({name} : {s})" if annotate else name


def show_goal(g: Goal, prec: int = 0, checked: bool = True) -> str:
    """Render a goal; ``checked`` says the surrounding position fixes a lambda's sort."""
    if isinstance(g, Const):
        return "true" if g.value else "false"
    if isinstance(g, (Eq, Neq)):
        op = "=" if isinstance(g, Eq) else "!="
        s = f"{show_term(g.lhs)} {op} {show_term(g.rhs)}"
        return f"({s})" if prec > 0 else s
    if isinstance(g, Rel):
        return g.name
    if isinstance(g, Or):
        s = f"{show_goal(g.left, 1)} \\/ {show_goal(g.right, 0)}"
        return f"({s})" if prec > 0 else s
    if isinstance(g, And):
        s = f"{show_goal(g.left, 2)} /\\ {show_goal(g.right, 1)}"
        return f"({s})" if prec > 1 else s
    if isinstance(g, (Exists, Lam)):
        cls = type(g)
        names = []
        while isinstance(g, cls):
            annotate = g.sort != IOTA and (cls is Exists or not checked)
            names.append(_binder(g.var, g.sort, annotate))
            g = g.body
        kw = "exists " if cls is Exists else "\\"
        s = f"{kw}{' '.join(names)}. {show_goal(g, 0)}"
        return f"({s})" if prec > 0 else s
    if isinstance(g, (AppRel, AppInd)):
        head = g
        args = []
        while isinstance(head, (AppRel, AppInd)):
            args.append(head)
            head = head.fn
        parts = [show_goal(head, 3, checked=False)]
        for a in reversed(args):
            if isinstance(a, AppInd):
                parts.append(show_term(a.arg, True))
            else:
                parts.append(show_goal(a.arg, 3))
        s = " ".join(parts)
        return f"({s})" if prec > 2 else s
    raise TypeError(f"not a goal: {g!r}")


def print_program(p: Program, goal: Goal | None = None) -> str:
    out = [f"{name} : {s}" for name, s in p.env.items()]
    out += [f"{name} = {show_goal(p.defs[name])}" for name in p.env]
    if goal is not None:
        out.append(f"goal: {show_goal(goal)}")
    return "\n".join(out) + "\n"
