from __future__ import annotations

import itertools
from dataclasses import replace

import pytest

from hochc.encoder import programs_equivalent
from hochc.equiv import Outcome, build_instances, decide_equiv, recheck, union_alphabet
from hochc.hors import generate_prefix, isomorphic
from hochc.syntax import parse_hors, parse_program
from hochc.trees import AlphabetError, bisimilar, is_bisimulation, parse_tree

from conftest import CORPUS_NAMES, DATA, corpus_text, load
from oracles import first_mismatch, read_scheme, rewrite_tree

PAIRS = list(itertools.combinations_with_replacement(CORPUS_NAMES, 2))


def oracle_tree(name, depth):
    return rewrite_tree(*read_scheme(corpus_text(name)), depth, fuel=5000)


def b_loop():
    return parse_hors("terminals:\n  b: 1\nrules:\n  S = b S\n")


def succ_count(t):
    n = 0
    while t[0] == "succ":
        n, t = n + 1, t[1]
    return n, t[0]


# ---------------------------------------------------------------------------
# the two list grammars
# ---------------------------------------------------------------------------

def test_list_pair_inequivalent_at_oracle_position():
    v = decide_equiv(load("g1"), load("g2"))
    assert v.outcome is Outcome.INEQUIVALENT
    assert (v.path, v.label1, v.label2, v.depth) == ([2, 2, 1, 1, 1, 1], "zero", "succ", 8)
    assert first_mismatch(oracle_tree("g1", 8), oracle_tree("g2", 8)) == (v.path, v.label1, v.label2)
    assert "eq1 unsatisfiable at budget 4" in v.notes


def test_list_pair_list_elements():
    # n-th element: succ^n zero in one tree and succ^(2^(n-1)) zero in the other
    t1, t2 = oracle_tree("g1", 14), oracle_tree("g2", 14)
    for n in range(1, 5):
        assert succ_count(t1[1]) == (n, "zero")
        assert succ_count(t2[1]) == (2 ** (n - 1), "zero")
        t1, t2 = t1[2], t2[2]


def test_list_pair_instance_program():
    inst = build_instances(load("g1"), load("g2"))
    ref = parse_program((DATA / "programs" / "list_pair.hochc").read_text()).program
    assert programs_equivalent(inst.program, ref)


def test_equal_loops_certified():
    v = decide_equiv(load("a_loop"), load("a_loop2"))
    assert v.outcome is Outcome.EQUIVALENT and v.certificate.kind == "rational-bisimulation"
    c = v.certificate
    assert is_bisimulation(c.tree1, c.tree2, c.relation)
    assert bisimilar(c.tree1, parse_tree("rec X. a(X)")) and bisimilar(c.tree2, c.tree1)


def test_identical_input():
    v = decide_equiv(load("g1"), load("g1"))
    assert v.outcome is Outcome.EQUIVALENT and v.certificate.kind == "syntactic-identity"
    renamed = parse_hors(corpus_text("g1").replace("G", "H"))
    assert decide_equiv(load("g1"), renamed).certificate.kind == "syntactic-identity"


def test_non_rational_equal_trees_stay_unknown():
    assert oracle_tree("g1", 10) == oracle_tree("g1_shifted", 10)
    v = decide_equiv(load("g1"), load("g1_shifted"))
    assert v.outcome is Outcome.UNKNOWN and v.depth == 64


def test_symbolic_eq0_is_recorded():
    v = decide_equiv(load("g1"), load("g2"), symbolic_eq0=True)
    assert "eq0 witnessed symbolically at budget 4" in v.notes
    assert v.outcome is Outcome.INEQUIVALENT


# ---------------------------------------------------------------------------
# instance construction
# ---------------------------------------------------------------------------

def test_self_instance_is_renamed_apart():
    inst = build_instances(load("g1"), load("g1"))
    assert set(inst.program.env) == {"R_S1_1", "R_G_1", "R_S1_2", "R_G_2"}
    assert isomorphic(inst.g1, inst.g2)


def test_disjoint_alphabets_use_the_union():
    assert union_alphabet(load("a_loop"), b_loop()) == {"a": 1, "b": 1}
    inst = build_instances(load("a_loop"), b_loop())
    assert inst.g1.terminals == inst.g2.terminals
    v = decide_equiv(load("a_loop"), b_loop())
    assert (v.outcome, v.path, v.label1, v.label2) == (Outcome.INEQUIVALENT, [], "a", "b")


def test_arity_conflict_rejected():
    other = parse_hors("terminals:\n  a: 2\n  e: 0\nrules:\n  S = a e e\n")
    with pytest.raises(AlphabetError):
        build_instances(load("a_loop"), other)


def test_divergent_grammars_compared_after_transform():
    v = decide_equiv(load("div_list"), load("g1"))
    inst = build_instances(load("div_list"), load("g1"))
    assert (v.path, v.label1, v.label2) == ([1], inst.div, "succ")


# ---------------------------------------------------------------------------
# soundness over every corpus pair
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("a, b", PAIRS)
def test_verdicts_are_sound_and_recheck(a, b):
    ha, hb = load(a), load(b)
    v = decide_equiv(ha, hb)  # raises if the two routes ever disagree
    assert recheck(ha, hb, v)
    inst = build_instances(ha, hb)
    if v.outcome is Outcome.INEQUIVALENT:
        t1, t2 = generate_prefix(inst.g1, v.depth), generate_prefix(inst.g2, v.depth)
        assert t1.label_at(v.path) == v.label1 != v.label2 == t2.label_at(v.path)
    elif v.outcome is Outcome.EQUIVALENT and v.certificate.kind == "rational-bisimulation":
        for d in (4, 16, 64):
            assert generate_prefix(inst.g1, d) == generate_prefix(inst.g2, d)


@pytest.mark.parametrize("a, b", [p for p in PAIRS if p[0] != p[1]])
def test_distinct_trees_are_separated(a, b):
    ra, rb = oracle_tree(a, 8), oracle_tree(b, 8)
    if first_mismatch(ra, rb) is not None:
        assert decide_equiv(load(a), load(b)).outcome is Outcome.INEQUIVALENT


@pytest.mark.parametrize("a, b", [("g1", "g2"), ("a_loop", "a_loop2"), ("g1", "g1_shifted"), ("prune", "skip")])
def test_schedule_extension_is_stable(a, b):
    short = decide_equiv(load(a), load(b), schedule=(2, 4, 8))
    full = decide_equiv(load(a), load(b), schedule=(2, 4, 8, 16, 32, 64, 128))
    if short.outcome is not Outcome.UNKNOWN:
        assert full.outcome is short.outcome and full.path == short.path


def test_tampered_evidence_fails_recheck():
    ha, hb = load("g1"), load("g2")
    v = decide_equiv(ha, hb)
    assert not recheck(ha, hb, replace(v, path=[2, 1, 1]))
    assert not recheck(ha, hb, replace(v, label2="zero"))
    w = decide_equiv(load("a_loop"), load("a_loop2"))
    assert not recheck(load("a_loop"), b_loop(), replace(w, certificate=replace(w.certificate, kind="syntactic-identity")))


def test_schedule_must_be_positive():
    with pytest.raises(ValueError):
        decide_equiv(load("g1"), load("g2"), schedule=(0, 2))
