from __future__ import annotations

import pytest

from conftest import CORPUS, load_corpus
from nestsub.cli import load
from nestsub.rename import Closure, internal_rename
from nestsub.simoracle import HoldsUpTo, UnsupportedQuantifier, bounded_sim
from nestsub.subtype import (
    NO, UNKNOWN, YES, Checker, Goal, InvalidSeed, check_subst_subtype,
    check_subtype, format_trace, match_args, validate_eqtypes,
)
from nestsub.syntax import Named, QuantVar, parse_program
from nestsub.variance import BI, CO, CONTRA, NON

N = Named


def verdicts(name):
    r = load_corpus(name)
    checker = Checker(r.sig, r.seeds)
    return {q.text: checker.check(q.lhs, q.rhs) for q in r.queries}


def kinds(name):
    return {goal: v.kind for goal, v in verdicts(name).items()}


def test_naturals():
    assert kinds("nat.nst") == {"even <= nat": YES, "odd <= nat": YES, "nat <= even": NO}


def test_nat_not_even_is_a_label_failure():
    v = verdicts("nat.nst")["nat <= even"]
    assert "not included" in v.reason
    # nat <= even unfolds once, then nat <= odd fails on the labels.
    assert v.path[0] == "expd: nat <= even"
    assert v.path[-2] == "expd: nat <= odd"


def test_lists():
    assert kinds("lists.nst") == {
        "List[even] <= List'[nat]": YES,
        "List[List[even]] <= List'[List'[nat]]": YES,
        "List[nat] -o List[nat] <= List[even] -o List[nat]": YES,
        "Cons[even][Cons[nat][Nil]] <= List[nat]": YES,
        "List[nat] <= List[even]": NO,
        "Seg[even] <= Seg[nat]": NO,
        "Seg[nat] <= Seg[even]": NO,
    }


def test_heterogeneous_lists():
    assert kinds("hlist.nst") == {
        "HNil <= HList": YES,
        "HCons[HNil] <= HList": YES,
        "HCons[HCons[HNil]] <= HList": YES,
        "Cons[nat][HNil] <= HList": NO,
    }


def test_seed_dependence():
    v = verdicts("noseed.nst")["D <= D'"]
    assert v.kind == UNKNOWN and v.reason == "depth"
    assert v.depth_used == 50
    seeded = verdicts("seed.nst")["D <= D'"]
    assert seeded.kind == YES
    assert seeded.seeds_used == ("T[x] <= T'[x]",)


def test_depth_flag_and_environment(monkeypatch):
    r = load_corpus("noseed.nst")
    q = r.queries[0]
    assert Checker(r.sig, depth=7).check(q.lhs, q.rhs).depth_used == 7
    monkeypatch.setenv("NESTSUB_DEPTH", "9")
    assert Checker(r.sig).check(q.lhs, q.rhs).depth_used == 9


def test_goal_budget():
    r = load_corpus("noseed.nst")
    q = r.queries[0]
    v = Checker(r.sig, max_goals=20).check(q.lhs, q.rhs)
    assert v.kind == UNKNOWN and v.reason == "goals"


def test_dyck():
    assert kinds("dyck.nst") == {"E0 <= D0": YES}
    assert kinds("dyck_noseed.nst") == {"E0 <= D0": UNKNOWN}


def test_stacks_and_queues():
    assert set(kinds("stack.nst").values()) == {YES}
    assert set(kinds("queue.nst").values()) == {YES}


def test_polymorphic_stacks_are_bivariant():
    assert kinds("poly_stack.nst") == {"Stack'[nat] <= Stack'[nat]": YES,
                                       "Stack'[nat] <= Stack'[even]": NO}


def test_check_subtype_goal_interface():
    r = load_corpus("nat.nst")
    v = check_subtype(r.sig, [], Goal(N("even"), N("nat")))
    assert v.kind == YES
    assert check_subtype(r.sig, [], Goal(N("nat"), N("even"), variance=CONTRA)).kind == YES
    assert check_subtype(r.sig, [], Goal(N("nat"), N("even"), variance=NON)).kind == YES
    assert check_subtype(r.sig, [], Goal(N("nat"), N("even"), variance=BI)).kind == NO
    assert check_subtype(r.sig, [], Goal(N("nat"), N("nat"), variance=BI)).kind == YES


def test_subst_subtype_examples():
    r = load_corpus("nat.nst")
    nat, even = N("nat"), N("even")
    assert check_subst_subtype(r.sig, [], (), (nat,), (even,), (("α", CONTRA),)).kind == YES
    assert check_subst_subtype(r.sig, [], (), (), (), ()).kind == YES
    assert check_subst_subtype(r.sig, [], (), (nat,), (even,), (("α", NON),)).kind == YES
    assert check_subst_subtype(r.sig, [], (), (nat,), (even,), (("α", CO),)).kind == NO


def test_match_args_examples():
    x = QuantVar("x")
    assert match_args((x,), (N("D"),), {"x"}) == {"x": N("D")}
    assert match_args((N("nat"),), (N("nat"),), {"x"}) == {}
    assert match_args((x, x), (N("D"), N("D'")), {"x"}) is None
    assert match_args((N("T", (x,)),), (N("T", (N("T", (N("D"),)),)),), {"x"}) == \
        {"x": N("T", (N("D"),))}
    # Variables of the goal are rigid.
    assert match_args((QuantVar("y"),), (N("D"),), {"x"}) is None


def test_validate_eqtypes_examples():
    r = load_corpus("stack.nst")
    assert len(validate_eqtypes(r.sig, r.seeds)) == 3
    bad = internal_rename(parse_program((CORPUS / "bad_seed.nst").read_text()))
    with pytest.raises(InvalidSeed) as info:
        validate_eqtypes(bad.sig, bad.seeds)
    (closure, verdict), = info.value.failures
    assert verdict.kind == NO and closure.origin == "nat <= even"
    assert validate_eqtypes(r.sig, []) == []


def test_seed_cannot_justify_itself():
    bad = internal_rename(parse_program((CORPUS / "bad_seed.nst").read_text()))
    # Used as a premise without validation, the seed would make the goal trivial.
    assert Checker(bad.sig, bad.seeds).check(N("nat"), N("even")).kind == YES
    assert Checker(bad.sig, bad.seeds).check(N("nat"), N("even"), force_expand=True).kind == NO


def test_determinism():
    for path in sorted(CORPUS.glob("*.nst")):
        if path.name == "bad_seed.nst":
            continue
        first = verdicts(path.name)
        second = verdicts(path.name)
        assert first == second


def test_alternation_never_fires():
    for path in sorted(CORPUS.glob("*.nst")):
        if path.name == "bad_seed.nst":
            continue
        for v in verdicts(path.name).values():
            assert v.alternation_violations == ()


def test_trace_contains_def_details():
    v = verdicts("seed.nst")["D <= D'"]
    text = format_trace(v.trace)
    assert "[def] T[D] <= T'[D']" in text
    assert "σ = {x ↦ D}" in text


def corpus_types(r):
    """Every closed nullary name, query side and eqtype side in a program."""
    out = [(N(n), ()) for n, d in r.original.items() if not d.params]
    for q in r.queries:
        out += [(q.lhs, ()), (q.rhs, ())]
    for cl in r.seeds:
        out += [(cl.lhs, cl.vars), (cl.rhs, cl.vars)]
    return out


def test_reflexivity_over_corpus():
    for path in sorted(CORPUS.glob("*.nst")):
        if path.name == "bad_seed.nst":
            continue
        r = load_corpus(path.name)
        checker = Checker(r.sig, r.seeds)
        for t, vars in corpus_types(r):
            assert checker.check(t, t, vars).kind == YES, (path.name, t)


def test_monotonic_seeding():
    for path in sorted(CORPUS.glob("*.nst")):
        if path.name == "bad_seed.nst":
            continue
        r = load_corpus(path.name)
        extra = [Closure((), N(n), N(n), f"{n} <= {n}")
                 for n, d in r.original.items() if not d.params]
        bigger = validate_eqtypes(r.sig, list(r.seeds) + extra)
        plain, seeded, more = Checker(r.sig), Checker(r.sig, r.seeds), Checker(r.sig, bigger)
        for q in r.queries:
            if plain.check(q.lhs, q.rhs).kind == YES:
                assert seeded.check(q.lhs, q.rhs).kind == YES
            if seeded.check(q.lhs, q.rhs).kind == YES:
                assert more.check(q.lhs, q.rhs).kind == YES


def test_subtype_verdicts_hold_in_the_oracle():
    for path in sorted(CORPUS.glob("*.nst")):
        if path.name == "bad_seed.nst":
            continue
        r = load_corpus(path.name)
        for text, v in verdicts(path.name).items():
            if v.kind != YES:
                continue
            q = next(q for q in r.queries if q.text == text)
            try:
                assert isinstance(bounded_sim(r.sig, q.lhs, q.rhs, 12), HoldsUpTo)
            except UnsupportedQuantifier:
                pass


def test_quantifier_rules():
    r = load(
        "type A = +{ a : ?x. x * A, b : 1 }\n"
        "type B = +{ a : ?y. y * B, b : 1, c : 1 }\n"
        "type C = +{ a : !y. y * C, b : 1 }\n"
        "type E = +{ a : ?y. +{ q : 1 } * E, b : 1 }\n"
        "check A <= B\ncheck A <= C\ncheck A <= E\n").renamed
    checker = Checker(r.sig)
    got = [checker.check(q.lhs, q.rhs).kind for q in r.queries]
    assert got == [YES, NO, NO]
