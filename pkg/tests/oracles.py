"""Independent reference implementations used as test oracles.

Everything here works on plain nested tuples ``(label, child, ...)`` and
shares no code with the package.
"""

from __future__ import annotations

BOT = "_bot"


def rewrite_tree(rules, terminals, start, depth, fuel=200_000):
    """Depth-``depth`` prefix of a recursion scheme by outermost rewriting.

    ``rules`` maps a nonterminal to ``(params, body)`` with bodies as nested
    tuples ``(head, arg, ...)`` or bare names.  Nodes at ``depth`` and heads
    that do not reach a terminal within ``fuel`` steps become ``BOT``.
    """
    def subst(t, env):
        if isinstance(t, str):
            return env.get(t, t)
        return tuple(subst(x, env) for x in t)

    def flatten(t):
        while isinstance(t, tuple) and not isinstance(t[0], str):
            t = t[0] + t[1:]
        return t

    def whnf(t):
        steps = fuel
        while True:
            t = flatten(t)
            head, args = (t, ()) if isinstance(t, str) else (t[0], t[1:])
            if head in terminals:
                return head, args
            params, body = rules[head]
            if len(args) < len(params):
                raise ValueError("partial application at ground sort")
            steps -= 1
            if steps <= 0:
                return None
            extra = args[len(params):]
            t = subst(body, dict(zip(params, args[:len(params)])))
            if extra:
                t = (t,) + extra if isinstance(t, str) else t + extra

    def go(t, d):
        if d == depth:
            return (BOT,)
        r = whnf(t)
        if r is None:
            return (BOT,)
        head, args = r
        return (head,) + tuple(go(a, d + 1) for a in args)

    return go(start, 0)


def nested(t):
    """Unfold a package Tree (finite) into nested tuples."""
    def go(n):
        return (t.labels[n],) + tuple(go(c) for c in t.kids[n])
    return go(0)


def first_mismatch(a, b, path=()):
    """Breadth-first, leftmost position where two nested trees differ."""
    level = [(a, b, list(path))]
    while level:
        nxt = []
        for x, y, p in level:
            if x[0] == BOT or y[0] == BOT:
                continue  # truncation point, not a label
            if x[0] != y[0] or len(x) != len(y):
                return p, x[0], y[0]
            for i, (cx, cy) in enumerate(zip(x[1:], y[1:]), 1):
                nxt.append((cx, cy, p + [i]))
        level = nxt
    return None


def leq(a, b):
    """Subtree order on nested tuples."""
    if a[0] == BOT:
        return True
    return a[0] == b[0] and len(a) == len(b) and all(leq(x, y) for x, y in zip(a[1:], b[1:]))


def read_scheme(text):
    """Minimal reader for the grammar files: returns (rules, terminals, start)."""
    import re

    section = None
    rules, terminals, start = {}, {}, None
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        head = line.strip()
        if head in ("terminals:", "nonterminals:", "rules:"):
            section = head[:-1]
            continue
        if head.startswith("start:"):
            start = head.split(":", 1)[1].strip()
            continue
        if section == "terminals":
            name, arity = head.split(":")
            terminals[name.strip()] = int(arity)
        elif section == "rules":
            lhs, rhs = head.split("=", 1)
            name, *params = lhs.split()
            toks = re.findall(r"[()]|[^\s()]+", rhs)
            body, rest = _app(toks)
            assert not rest, rest
            rules[name] = (tuple(params), body)
    return rules, terminals, start or next(iter(rules))


def _atom(toks):
    if toks[0] == "(":
        t, rest = _app(toks[1:])
        assert rest[0] == ")"
        return t, rest[1:]
    return toks[0], toks[1:]


def _app(toks):
    items = []
    while toks and toks[0] != ")":
        t, toks = _atom(toks)
        items.append(t)
    return (items[0] if len(items) == 1 else tuple(items)), toks
