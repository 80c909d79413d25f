"""Law checks shared by the unit tests and the acceptance suite.

Each ``check_*`` function returns ``(cases, violations)`` where
``violations`` is a list of human-readable descriptions.
"""

from __future__ import annotations

import itertools
import random

from hochc.botfree import botfree_transform
from hochc.coengine import Membership, check_membership, descend
from hochc.core import (IOTA, O, And, AppInd, Arrow, Const, Domains, Eq, Exists, FiniteStructure, Lam, Or,
                        Program, Rel, Solvability, eval_goal, fixpoints, gfp, leq_valuation, lfp, one_step,
                        solve_coinductive)
from hochc.encoder import encode, relation_name
from hochc.hors import generate_prefix, kleene_approximant, rational_tree
from hochc.trees import (BOT, BOTTOM, Fn, GraphBuilder, Tree, Var, first_difference, i_iota, j_iota, leaf, node,
                         prefix, subtree_order, unary_loop)

from oracles import leq, nested

def random_prefix(rng: random.Random, depth: int) -> Tree:
    if depth == 0 or rng.random() < 0.25:
        return rng.choice([BOTTOM, leaf("c"), leaf("d")])
    sym = rng.choice(["f", "g", "c", BOT])
    if sym == "f":
        return node("f", random_prefix(rng, depth - 1), random_prefix(rng, depth - 1))
    if sym == "g":
        return node("g", random_prefix(rng, depth - 1))
    return leaf(sym)


def random_carrier(rng: random.Random) -> list[Tree]:
    size = rng.randint(1, 8)
    out = {random_prefix(rng, rng.randint(0, 4)) for _ in range(size)}
    # sometimes add prefixes of existing members, so the order is not discrete
    for t in list(out):
        if rng.random() < 0.5:
            out.add(prefix(t, rng.randint(0, 3)))
    return sorted(out, key=str)


def check_embedding_laws(n: int = 1000, seed: int = 0):
    """i is injective and antitone, i(bottom) is top, j . i = id."""
    rng = random.Random(seed)
    bad = []
    for k in range(n):
        carrier = random_carrier(rng)
        images = {t: i_iota(t, carrier) for t in carrier}
        if not all(i_iota(BOTTOM, carrier).values()):
            bad.append(f"carrier {k}: i(bottom) is not top")
        for t1, t2 in itertools.combinations(carrier, 2):
            if images[t1] == images[t2]:
                bad.append(f"carrier {k}: i not injective on {t1}, {t2}")
        for t1, t2 in itertools.permutations(carrier, 2):
            if leq(nested(t1), nested(t2)) and not all(images[t1][s] or not images[t2][s] for s in carrier):
                bad.append(f"carrier {k}: i not antitone on {t1} <= {t2}")
        for t in carrier:
            if j_iota(images[t], carrier) != t:
                bad.append(f"carrier {k}: j(i({t})) != {t}")
    return n, bad


def _rational_filler(rng: random.Random) -> Tree:
    return rng.choice([unary_loop("g"), Tree(("f", "c"), ((1, 0), ())), Tree(("f",), ((0, 0),))])


def check_lub_glb(n: int = 500, seed: int = 1):
    """i(lub D) is the pointwise meet of i over a directed chain D."""
    rng = random.Random(seed)
    bad = []
    for k in range(n):
        if k % 2 == 0:
            top = random_prefix(rng, 5)
            lub = top
            depth = 6
        else:
            # an infinite chain: prefixes of a rational tree, whose lub is the tree itself
            g = GraphBuilder()
            stem = random_prefix(rng, 3)
            filler = g.embed(_rational_filler(rng))

            def graft(t, m):
                if t.labels[m] == BOT:
                    return filler
                return g.add(t.labels[m], [graft(t, c) for c in t.kids[m]])

            lub = g.build(graft(stem, 0))
            depth = 8
        chain = [prefix(lub, d) for d in range(depth + 1)]
        carrier = sorted({*chain, lub, *random_carrier(rng)}, key=str)
        # members are at most depth + 1 deep, so longer chain elements are
        # above none of them but the lub: the meet over the whole chain is
        # reached by depth + 3
        longer = [prefix(lub, d) for d in range(depth + 3)]
        meet = {s: all(i_iota(d, carrier)[s] for d in longer) for s in carrier}
        if i_iota(lub, carrier) != meet:
            bad.append(f"chain {k}: i(lub) differs from the meet")
    return n, bad


def check_inclusion_nonemptiness(grammars: dict, max_n: int = 8, depth: int = 8):
    """Symbolic n-th iterate vs the n-th Kleene approximant, for every corpus grammar."""
    bad = []
    cases = 0
    for name, h in grammars.items():
        bf = botfree_transform(h).hors
        for g, tag in ((h, "original"), (bf, "bot-free")):
            p = encode(g)
            for n in range(max_n + 1):
                cases += 1
                states, r = descend(p, relation_name(g.start), n)
                if not states:
                    bad.append(f"{name}/{tag}: iterate {n} is empty")
                    continue
                alpha = kleene_approximant(g, n, depth)
                for s in states:
                    if not subtree_order(alpha, s.prefix_of(r, depth)):
                        bad.append(f"{name}/{tag}: iterate {n} admits a tree outside the approximant")
                if g is bf and not any(subtree_order(s.prefix_of(r, depth), generate_prefix(bf, depth))
                                       for s in states):
                    bad.append(f"{name}: iterate {n} excludes the generated tree")
    return cases, bad


def _fill(t: Tree, filler: Tree) -> Tree:
    g = GraphBuilder()
    f = None

    def go(m):
        nonlocal f
        if t.labels[m] == BOT:
            if f is None:
                f = g.embed(filler)
            return f
        return g.add(t.labels[m], [go(c) for c in t.kids[m]])

    return g.build(go(0))


def membership_candidates(bf, max_depth: int = 8) -> list[Tree]:
    out = []
    rt = rational_tree(bf)
    if rt is not None:
        out.append(rt)
    for d in range(1, max_depth + 1):
        for lab, arity in bf.terminals.items():
            if arity == 1:
                out.append(_fill(generate_prefix(bf, d), unary_loop(lab)))
    return out


def check_membership_lockstep(grammars: dict, max_depth: int = 8, fuel: int = 16):
    """Symbolic membership in R_S agrees with operational prefix equality."""
    bad = []
    cases = 0
    for name, h in grammars.items():
        bf = botfree_transform(h).hors
        p = encode(bf)
        rel = relation_name(bf.start)
        for t in membership_candidates(bf, max_depth):
            cases += 1
            m = check_membership(p, rel, t, fuel)
            same = first_difference(generate_prefix(bf, 64), prefix(t, 64), 64) is None
            if m is Membership.UNKNOWN:
                bad.append(f"{name}: no verdict for {t}")
            elif (m is Membership.YES) != same:
                bad.append(f"{name}: symbolic {m.value} but prefixes {'agree' if same else 'differ'} on {t}")
    return cases, bad


# ---------------------------------------------------------------------------
# exhaustive toy programs over a two-element carrier
# ---------------------------------------------------------------------------

C, D = leaf("c"), leaf("d")
REL = Arrow(IOTA, O)


def toy_structures() -> list[FiniteStructure]:
    swap = {(C,): D, (D,): C}
    collapse = {(C,): C, (D,): C}
    return [FiniteStructure((C, D), {"f": swap}), FiniteStructure((C, D), {"f": collapse})]


def _atoms(names: list[str]) -> list:
    x = Var("x")
    out = [Const(True), Const(False), Eq(x, C), Eq(x, D)]
    for r in names:
        out += [AppInd(Rel(r), x), AppInd(Rel(r), Fn("f", (x,))),
                Exists("y", IOTA, AppInd(Rel(r), Var("y")))]
    return out


def toy_bodies(names: list[str], pairs: bool) -> list:
    atoms = _atoms(names)
    out = list(atoms)
    if pairs:
        for a, b in itertools.combinations(atoms, 2):
            out += [And(a, b), Or(a, b)]
    return [Lam("x", IOTA, b) for b in out]


def toy_goals(names: list[str]) -> list:
    out = [Const(True)]
    for r in names:
        out += [AppInd(Rel(r), C), AppInd(Rel(r), D), Exists("z", IOTA, AppInd(Rel(r), Var("z")))]
    if len(names) == 2:
        z = Var("z")
        out.append(Exists("z", IOTA, And(AppInd(Rel(names[0]), z), AppInd(Rel(names[1]), z))))
    return out


def toy_programs(exhaustive: bool = True):
    one = ["R"]
    for b in toy_bodies(one, pairs=True):
        yield Program({"R": REL}, {"R": b})
    two = ["R1", "R2"]
    bodies = toy_bodies(two, pairs=exhaustive)
    for b1, b2 in itertools.product(bodies, bodies):
        yield Program({"R1": REL, "R2": REL}, {"R1": b1, "R2": b2})


def check_greatest_model_laws(exhaustive: bool = True):
    """gfp dominates every fixpoint; solvability agrees with brute force over fixpoints."""
    bad = []
    cases = 0
    for structure in toy_structures():
        dom = Domains(structure)
        for p in toy_programs(exhaustive):
            cases += 1
            top = gfp(p, structure, dom)
            bottom = lfp(p, structure, dom)
            fps = fixpoints(p, structure, dom)
            if one_step(p, top, structure, dom) != top or top not in fps:
                bad.append(f"gfp is not a fixpoint: {p.defs}")
            if bottom not in fps:
                bad.append(f"lfp is not a fixpoint: {p.defs}")
            for b in fps:
                if not leq_valuation(p, b, top, dom):
                    bad.append(f"fixpoint above gfp: {p.defs}")
                if not leq_valuation(p, bottom, b, dom):
                    bad.append(f"fixpoint below lfp: {p.defs}")
            for goal in toy_goals(list(p.env)):
                brute = any(eval_goal(p.env, goal, b, structure, dom) for b in fps)
                got = solve_coinductive(p, goal, structure) is Solvability.SOLVABLE
                if brute != got:
                    bad.append(f"solvability mismatch for {goal} in {p.defs}")
    return cases, bad
