from __future__ import annotations

import itertools
from pathlib import Path

import pytest

from hochc.botfree import (DIV, STEP, Staged, botfree_transform, is_bot_free, stage1_productive, stage2_reflect,
                           stage3_erase)
from hochc.core import CapacityError
from hochc.hors import Hors, Rule, app, divergence_flags, generate_prefix
from hochc.syntax import parse_hors, print_hors
from hochc.trees import BOT, BOTTOM, bot_free_conversion, leaf, node, spine

from conftest import CORPUS_NAMES, load
from oracles import nested

GOLDEN = Path(__file__).parent / "data" / "golden"


def rule_text(h, f):
    lines = (line.strip() for line in print_hors(h).splitlines())
    return next(line for line in lines if line.startswith(f + " ") and " = " in line)


def test_stage1_on_div_list():
    s1 = stage1_productive(load("div_list"))
    assert rule_text(s1.hors, "S") == f"S = {DIV} (F zero)"
    assert rule_text(s1.hors, "F") == "F x = cons (G x) (F (succ x))"
    assert rule_text(s1.hors, "G") == f"G x = {DIV} (G (succ x))"


def test_fresh_symbols_avoid_collisions():
    h = Hors({DIV: 1, STEP: 1, "e": 0}, {"S": Rule((), app("T", "e")), "T": Rule(("x",), app(DIV, "x"))}, "S")
    s = botfree_transform(h)
    assert s.div not in h.terminals
    assert s.div == DIV + "1"


def test_stage2_on_div_list_matches_golden():
    s2 = stage2_reflect(stage1_productive(load("div_list")))
    assert print_hors(s2.hors) == (GOLDEN / "div_list_stage2.hors").read_text()


def _expected_div_list(depth, root_step):
    """s? cons(b^w, cons(b^w, ...)) truncated at ``depth``."""
    def go(d):
        if d >= depth:
            return BOTTOM
        left = spine(DIV, depth - d - 1) if d + 1 < depth else BOTTOM
        return node("cons", left, go(d + 1))
    if root_step:
        return node(STEP, go(1)) if depth > 0 else BOTTOM
    return go(0)


@pytest.mark.parametrize("depth", range(2, 9))
def test_div_list_stages(depth):
    h = load("div_list")
    s2 = stage2_reflect(stage1_productive(h))
    s3 = stage3_erase(s2)
    assert generate_prefix(s2.hors, depth) == _expected_div_list(depth, root_step=True)
    assert generate_prefix(s3.hors, depth) == _expected_div_list(depth, root_step=False)


def test_stage1_div_list_tree_at_depth_3():
    t = generate_prefix(stage1_productive(load("div_list")).hors, 3)
    # the root b stays a b until Stage 2 classifies it
    assert t == node(DIV, node("cons", node(DIV, BOTTOM), node("cons", BOTTOM, BOTTOM)))


def test_no_div_grammar_unchanged_up_to_renaming():
    h = load("a_loop")
    s2 = stage2_reflect(stage1_productive(h))
    assert print_hors(s2.hors).count(DIV) == 1  # declared, never used
    for d in range(6):
        assert generate_prefix(s2.hors, d) == generate_prefix(h, d)


def test_pure_divergence():
    h = Hors({"a": 1}, {"S": Rule((), app("S"))}, "S")
    s2 = stage2_reflect(stage1_productive(h))
    assert rule_text(s2.hors, "S") == f"S = {DIV} S"
    assert generate_prefix(botfree_transform(h).hors, 5) == spine(DIV, 5)


def test_stage3_degenerate_step():
    h = Hors({STEP: 1, "a": 1, "zero": 0}, {"S": Rule((), app(STEP, app("a", "zero")))}, "S")
    s3 = stage3_erase(Staged(h, DIV, STEP))
    assert generate_prefix(s3.hors, 4) == node("a", leaf("zero"))


def test_stage3_prunes_unused_identity():
    h = load("a_loop")
    s3 = stage3_erase(stage2_reflect(stage1_productive(h)))
    assert s3.identity is None and "I" not in s3.hors.rules


def test_g1_tree_unchanged():
    h = load("g1")
    bf = botfree_transform(h).hors
    for d in range(9):
        assert generate_prefix(bf, d) == generate_prefix(h, d)
    assert is_bot_free(h)
    assert not is_bot_free(load("div_list"))


@pytest.mark.parametrize("name", CORPUS_NAMES)
def test_conversion_correctness(name):
    h = load(name)
    s = botfree_transform(h)
    for d in range(9):
        assert generate_prefix(s.hors, d) == bot_free_conversion(generate_prefix(h, d), d, s.div)


def _erase(t, b):
    label, *kids = t
    if label == b:
        return _erase(kids[0], b)
    return (label, *(_erase(k, b) for k in kids))


def _cut(t, d):
    if d == 0:
        return (BOT,)
    return (t[0], *(_cut(k, d - 1) for k in t[1:]))


@pytest.mark.parametrize("name", CORPUS_NAMES)
def test_stage1_erasure_recovers_tree(name):
    h = load(name)
    s1 = stage1_productive(h)
    for d in range(6):
        erased = _cut(_erase(nested(generate_prefix(s1.hors, 4 * d + 4)), s1.div), d)
        assert erased == nested(generate_prefix(h, d))


@pytest.mark.parametrize("name", CORPUS_NAMES)
def test_output_has_no_genuine_bottom(name):
    s = botfree_transform(load(name))
    # every start-reachable configuration head-normalises to a terminal
    flags = divergence_flags(s.hors)
    assert flags.flag(app(s.hors.start)) == 0
    for d in range(1, 8):
        t = generate_prefix(s.hors, d)

        def walk(n, depth):
            if t.labels[n] == BOT:
                assert depth == d
            for c in t.kids[n]:
                walk(c, depth + 1)
        walk(0, 0)


SAME_ALPHABET = [(a, b) for a, b in itertools.combinations(CORPUS_NAMES, 2)
                 if load(a).terminals == load(b).terminals]


@pytest.mark.parametrize("a, b", SAME_ALPHABET)
def test_equivalence_preserved(a, b):
    ha, hb = load(a), load(b)
    ta, tb = botfree_transform(ha, div=DIV).hors, botfree_transform(hb, div=DIV).hors
    for d in range(7):
        assert (generate_prefix(ha, d) == generate_prefix(hb, d)) == \
            (generate_prefix(ta, d) == generate_prefix(tb, d))


def test_capacity_bound():
    with pytest.raises(CapacityError):
        botfree_transform(load("g2"), max_variants=1)


def test_stage_outputs_parse_back():
    for name in CORPUS_NAMES:
        s = botfree_transform(load(name))
        again = parse_hors(print_hors(s.hors))
        assert again.rules == s.hors.rules
