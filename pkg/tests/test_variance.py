from __future__ import annotations

import itertools

import pytest
from hypothesis import given, settings, strategies as st

from nestsub.syntax import Lolli, Named, One, Param, QuantVar, parse_program
from nestsub.variance import (
    ALL_VARIANCES, BI, CO, CONTRA, NON, Definition, ValidityError,
    check_signature_valid, check_subst_valid, check_type_valid, infer_variances,
    join, make_signature, nest, nest_context, variance_leq,
)
from strategies import types

PAIRS = list(itertools.product(ALL_VARIANCES, repeat=2))
TRIPLES = list(itertools.product(ALL_VARIANCES, repeat=3))

# Nesting table, row ξ and column ξ'.
TABLE = {
    CO:     {CO: CO,     CONTRA: CONTRA, BI: BI,  NON: NON},
    CONTRA: {CO: CONTRA, CONTRA: CO,     BI: BI,  NON: NON},
    BI:     {CO: BI,     CONTRA: BI,     BI: BI,  NON: NON},
    NON:    {CO: NON,    CONTRA: NON,    BI: NON, NON: NON},
}


def sig_of(text):
    prog = parse_program(text)
    return infer_variances(make_signature((d.name, d.params, d.body) for d in prog.typedefs))


LIST_SEG = """
type List[α] = +{ nil : 1, cons : α * List[α] }
type Seg[α] = List[α] -o List[α]
"""


def test_leq_examples():
    assert variance_leq(NON, CO)
    assert variance_leq(CO, CO)
    assert not variance_leq(CO, CONTRA)


def test_nest_examples():
    assert nest(CO, CONTRA) is CONTRA
    assert nest(CONTRA, CONTRA) is CO
    assert nest(NON, BI) is NON


@pytest.mark.parametrize("a,b", PAIRS)
def test_nest_table(a, b):
    assert nest(a, b) is TABLE[a][b]


def test_nest_context_examples():
    assert nest_context((("α", CO),), CONTRA) == (("α", CONTRA),)
    assert nest_context((), BI) == ()
    assert nest_context((("α", CO), ("β", CONTRA)), BI) == (("α", BI), ("β", BI))


def test_join_examples():
    assert join(CO, CONTRA) is BI
    assert all(join(NON, x) is x for x in ALL_VARIANCES)
    assert join(CO, BI) is BI


def test_leq_is_a_partial_order():
    for a in ALL_VARIANCES:
        assert variance_leq(a, a)
    for a, b in PAIRS:
        if variance_leq(a, b) and variance_leq(b, a):
            assert a is b
    for a, b, c in TRIPLES:
        if variance_leq(a, b) and variance_leq(b, c):
            assert variance_leq(a, c)


def test_nest_algebra():
    for a, b in PAIRS:
        assert nest(a, b) is nest(b, a)
    for a, b, c in TRIPLES:
        assert nest(nest(a, b), c) is nest(a, nest(b, c))
    for a, b, c in TRIPLES:
        if variance_leq(a, b):
            assert variance_leq(nest(a, c), nest(b, c))
            assert variance_leq(nest(c, a), nest(c, b))
    for a in ALL_VARIANCES:
        assert nest(a, CO) is a and nest(CO, a) is a


def test_join_is_least_upper_bound():
    for a, b in PAIRS:
        j = join(a, b)
        assert variance_leq(a, j) and variance_leq(b, j)
        for c in ALL_VARIANCES:
            if variance_leq(a, c) and variance_leq(b, c):
                assert variance_leq(j, c)


def test_infer_list_and_segment():
    sig = sig_of(LIST_SEG + "type V[α] = +{ a : 1 }")
    assert sig["List"].variances == (CO,)
    assert sig["Seg"].variances == (BI,)
    assert sig["V"].variances == (NON,)


def test_infer_mutual_recursion_and_negation():
    sig = sig_of("""
        type A[p][q] = +{ l : B[p] -o q, r : A[q][p] }
        type B[p] = &{ x : p * B[p] }
        type Neg[p] = p -o 1
        type NegNeg[p] = Neg[Neg[p]]
    """)
    assert sig["B"].variances == (CO,)
    # p occurs negatively, q positively; A swaps them recursively.
    assert sig["A"].variances == (BI, BI)
    assert sig["Neg"].variances == (CONTRA,)
    assert sig["NegNeg"].variances == (CO,)


def test_inference_is_a_fixed_point():
    sig = sig_of(LIST_SEG)
    assert infer_variances(sig) == sig
    assert check_signature_valid(sig) == []


def test_type_validity_examples():
    sig = sig_of(LIST_SEG)
    seg = Lolli(Named("List", (Param("α"),)), Named("List", (Param("α"),)))
    check_type_valid((), (("α", BI),), seg, CO, sig)
    with pytest.raises(ValidityError):
        check_type_valid((), (("α", CO),), Param("α"), CONTRA, sig)
    check_type_valid({"x"}, (), QuantVar("x"), BI, sig)
    with pytest.raises(ValidityError):
        check_type_valid((), (), QuantVar("x"), CO, sig)


def test_validity_error_has_path():
    sig = sig_of(LIST_SEG)
    with pytest.raises(ValidityError) as info:
        check_type_valid((), (("α", CO),), Lolli(Named("List", (Param("α"),)), One()), CO, sig)
    assert info.value.path == ("-o1", "List.α")


def test_subst_validity_examples():
    sig = sig_of("type nat = +{ z : 1, s : nat }")
    check_subst_valid((), (), (Named("nat"),), (("α", CO),), sig)
    check_subst_valid((), (), (), (), sig)
    with pytest.raises(ValidityError):
        check_subst_valid((), (("β", CO),), (Param("β"),), (("α", CONTRA),), sig)


def test_signature_validity_examples():
    assert check_signature_valid(sig_of(LIST_SEG)) == []
    loop = {"V": Definition("V", ("α",), (CO,), Named("V", (Param("α"),)))}
    errors = check_signature_valid(loop)
    assert len(errors) == 1 and "contractive" in str(errors[0])
    assert check_signature_valid({}) == []


# Random validity properties over a small signature.
PROP_SIG = sig_of("""
    type nat = +{ z : 1, s : nat }
    type List[a] = +{ nil : 1, cons : a * List[a] }
    type Seg[a] = List[a] -o List[a]
    type Neg[a] = a -o 1
    type Const[a] = +{ k : 1 }
""")
PROP_NAMES = {"nat": 0, "List": 1, "Seg": 1, "Neg": 1, "Const": 1}
variances = st.sampled_from(ALL_VARIANCES)
contexts = st.tuples(variances, variances, variances).map(
    lambda vs: (("a", vs[0]), ("b", vs[1]), ("α", vs[2])))
var_sets = st.sets(st.sampled_from(["x", "y", "z"]))
prop_types = types(names=PROP_NAMES, max_leaves=8)


def _valid(vars, ctx, t, at):
    try:
        check_type_valid(vars, ctx, t, at, PROP_SIG)
        return True
    except ValidityError:
        return False


@settings(max_examples=300, deadline=None)
@given(var_sets, contexts, prop_types, variances)
def test_downward_closure(vars, ctx, t, at):
    if _valid(vars, ctx, t, at):
        for lower in ALL_VARIANCES:
            if variance_leq(lower, at):
                assert _valid(vars, ctx, t, lower)


@settings(max_examples=300, deadline=None)
@given(var_sets, contexts, prop_types, variances, variances)
def test_nest_shift(vars, ctx, t, at, shift):
    if _valid(vars, ctx, t, at):
        assert _valid(vars, nest_context(ctx, shift), t, nest(at, shift))
