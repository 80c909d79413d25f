"""End-to-end acceptance checks, one test per criterion.

Each test appends a one-line verdict to ``RESULTS``; the pytest summary hook
in conftest prints them, and running this file directly prints them too.
"""

from __future__ import annotations

import time

from hochc.botfree import DIV, STEP, botfree_transform, stage1_productive, stage2_reflect
from hochc.coengine import Status, solve_goal
from hochc.encoder import encode, programs_equivalent
from hochc.equiv import Outcome, decide_equiv
from hochc.core import FiniteStructure, gfp, lfp
from hochc.hors import generate_prefix, rational_tree
from hochc.syntax import parse_hors, parse_program, show_goal
from hochc.trees import BOTTOM, bisimilar, leaf, node, spine, subtree_order, unary_loop

from conftest import CORPUS_NAMES, DATA, corpus_text, load
from oracles import first_mismatch, read_scheme, rewrite_tree
import laws

RESULTS: list[str] = []


def report(n: int, ok: bool, detail: str, started: float):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail} ({time.perf_counter() - started:.2f} s)"
    RESULTS.append(line)
    print(line)
    assert ok, line


def succs(n: int, below):
    for _ in range(n):
        below = node("succ", below)
    return below


def program(name):
    return parse_program((DATA / "programs" / f"{name}.hochc").read_text())


def test_criterion_1_list_grammars():
    t0 = time.perf_counter()
    v = decide_equiv(load("g1"), load("g2"))
    # the drawn common prefix: two list cells, deepest node four edges down
    drawn = node("cons", succs(1, leaf("zero")), node("cons", succs(2, leaf("zero")), BOTTOM))
    p1, p2 = generate_prefix(load("g1"), 5), generate_prefix(load("g2"), 5)
    prefix_ok = subtree_order(drawn, p1) and subtree_order(drawn, p2)
    prefix_ok &= generate_prefix(load("g1"), 4) == generate_prefix(load("g2"), 4)
    # third cell (n = 3): succ^3 zero against succ^4 zero
    o1 = rewrite_tree(*read_scheme(corpus_text("g1")), 8)
    o2 = rewrite_tree(*read_scheme(corpus_text("g2")), 8)
    expected = ([2, 2, 1, 1, 1, 1], "zero", "succ")
    law_ok = first_mismatch(o1, o2) == expected
    law_ok &= o1[2][2][1] == ("succ", ("succ", ("succ", ("zero",))))
    ok = (v.outcome is Outcome.INEQUIVALENT and (v.path, v.label1, v.label2) == expected
          and prefix_ok and law_ok and time.perf_counter() - t0 < 5)
    drawn_text = "matches" if prefix_ok else "differs"
    report(1, ok, f"{v.outcome.value} at {v.path}, {v.label1} vs {v.label2}; drawn prefix {drawn_text}", t0)


def test_criterion_2_unary_loop_programs():
    t0 = time.perf_counter()
    pa, pb = program("p_a"), program("p_b")
    va = solve_goal(pa.program, pa.goal, 8)
    vb = solve_goal(pb.program, pb.goal, 8)
    a_w, b_w = unary_loop("a"), unary_loop("b")
    closed = FiniteStructure((a_w, b_w), {"a": {(a_w,): a_w, (b_w,): a_w}})
    g, low = gfp(pa.program, closed)["R_S"], lfp(pa.program, closed)["R_S"]
    greatest = {t for t in (a_w, b_w) if g(t)}
    least = {t for t in (a_w, b_w) if low(t)}
    ok = (va.status is Status.SAT and vb.status is Status.UNSAT and greatest == {a_w} and not least
          and time.perf_counter() - t0 < 1)
    report(2, ok, f"P_a {va.status.value}, P_b {vb.status.value}, gfp size {len(greatest)}, lfp size {len(least)}", t0)


def _div_list_shape(depth: int, root) -> object:
    def cells(d):
        if d >= depth:
            return BOTTOM
        return node("cons", spine(DIV, depth - d - 1) if d + 1 < depth else BOTTOM, cells(d + 1))
    if root is None:
        return cells(0)
    return node(root, cells(1)) if depth > 0 else BOTTOM


def test_criterion_3_divergence_removal():
    t0 = time.perf_counter()
    h = load("div_list")
    final = botfree_transform(h).hors
    shape_ok = all(generate_prefix(final, d) == _div_list_shape(d, None) for d in range(2, 9))
    s1 = stage1_productive(h)
    s2 = stage2_reflect(s1)
    stages_ok = generate_prefix(s1.hors, 3) == _div_list_shape(3, DIV)
    stages_ok &= generate_prefix(s2.hors, 3) == _div_list_shape(3, STEP)
    ok = shape_ok and stages_ok and time.perf_counter() - t0 < 1
    report(3, ok, f"final shape depths 2-8 {'ok' if shape_ok else 'wrong'}, "
                  f"stage trees at depth 3 {'ok' if stages_ok else 'wrong'}", t0)


def test_criterion_4_encoder_golden():
    t0 = time.perf_counter()
    ref = parse_program((DATA / "programs" / "list_pair.hochc").read_text()).program
    union_ok = programs_equivalent(encode(load("g1")).union(encode(load("g2"))), ref)
    loop = encode(parse_hors("terminals:\n  a: 1\nrules:\n  S = a S\n")).defs["R_S"]
    loop_ok = show_goal(loop) == r"\r. exists r1. (a r1 = r) /\ R_S r1"
    report(4, union_ok and loop_ok, f"five definitions {'equal' if union_ok else 'differ'}, "
                                    f"unary loop {'exact' if loop_ok else 'differs'}", t0)


def test_criterion_5_property_suite():
    t0 = time.perf_counter()
    grammars = {n: load(n) for n in CORPUS_NAMES}
    parts = {
        "embedding": laws.check_embedding_laws(1000),
        "lub/glb": laws.check_lub_glb(500),
        "iterates": laws.check_inclusion_nonemptiness(grammars, max_n=8),
        "membership": laws.check_membership_lockstep(grammars, max_depth=8),
    }
    bad = [v for _, vs in parts.values() for v in vs]
    summary = ", ".join(f"{k} {cases} cases/{len(vs)} bad" for k, (cases, vs) in parts.items())
    report(5, not bad and time.perf_counter() - t0 < 120, summary, t0)


def test_criterion_6_greatest_model():
    t0 = time.perf_counter()
    cases, bad = laws.check_greatest_model_laws(exhaustive=True)
    report(6, not bad and time.perf_counter() - t0 < 120, f"{cases} programs, {len(bad)} violations", t0)


def test_criterion_7_rational_certificate():
    t0 = time.perf_counter()
    v = decide_equiv(load("a_loop"), load("a_loop2"))
    c = v.certificate
    # independent construction of both trees
    direct = bisimilar(rational_tree(load("a_loop")), rational_tree(load("a_loop2")))
    ok = (v.outcome is Outcome.EQUIVALENT and c.kind == "rational-bisimulation" and bisimilar(c.tree1, c.tree2)
          and direct and time.perf_counter() - t0 < 1)
    report(7, ok, f"{v.outcome.value} with {c.kind if c else 'no'} certificate", t0)


def test_criterion_8_honest_unknown():
    t0 = time.perf_counter()
    schedule = (2, 4, 8, 16, 32, 64)
    v = decide_equiv(load("g1"), load("g1_shifted"), schedule=schedule)
    same = rewrite_tree(*read_scheme(corpus_text("g1")), 10) == rewrite_tree(*read_scheme(corpus_text("g1_shifted")), 10)
    ok = same and v.outcome is Outcome.UNKNOWN and v.depth == schedule[-1]
    report(8, ok, f"{v.outcome.value} at depth {v.depth}", t0)


if __name__ == "__main__":
    import sys

    import pytest

    sys.exit(pytest.main([__file__, "-q"]))
