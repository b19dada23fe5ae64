"""Decomposition construction, enumeration, caps, and repair-local listing."""

from __future__ import annotations

import math

import pytest

from proxyaudit.decomp import (
    CHAIN_SUBSET,
    OCCURRENCE,
    Decomposition,
    EnumerationCaps,
    chain_subset_decomposition,
    decomposition_from_holes,
    enumerate_decompositions,
    local_expressions,
    occurrence_decomposition,
)
from proxyaudit.errors import PositionError
from proxyaudit.expr import (
    HOLE,
    Const,
    Var,
    add,
    evaluate,
    free_vars,
    gt,
    ite,
    mul,
    sub,
    substitute,
    to_text,
)

X, Y = Var("x"), Var("y")
TWO = Const(2.0)

# if (x + y + x) > 2 then (x + y + x) else x
GUARDED = ite(gt(add(X, Y, X), TWO), add(X, Y, X), X)


def _eval_rows(expr):
    rows = [{"x": 0.5, "y": 1.0}, {"x": 3.0, "y": -1.0}, {"x": -2.0, "y": 0.0}]
    return [evaluate(expr, r) for r in rows]


# -- occurrence decompositions -------------------------------------------------


def test_occurrence_round_trip_is_exact():
    dec = occurrence_decomposition(GUARDED, [(1,), (0, 0)])
    assert dec.kind == OCCURRENCE
    assert dec.hole_positions == ((0, 0), (1,))  # sorted
    assert to_text(dec.subprogram) == "(x + y + x)"
    assert HOLE in free_vars(dec.context)
    assert substitute(dec.subprogram, HOLE, dec.context) == GUARDED


def test_occurrence_rejects_mismatched_holes():
    with pytest.raises(PositionError):
        occurrence_decomposition(GUARDED, [(0, 0), (2,)])
    with pytest.raises(PositionError):
        occurrence_decomposition(GUARDED, [])


def test_occurrence_accepts_commuted_operands():
    program = sub(add(X, Y), add(Y, X))
    dec = occurrence_decomposition(program, [(0,), (1,)])
    # the representative is the subtree at the first hole
    assert dec.subprogram == add(X, Y)


# -- chain-subset decompositions -----------------------------------------------


def test_chain_subset_shape():
    program = add(X, Y, mul(X, TWO))
    dec = chain_subset_decomposition(program, (), (0, 2))
    assert dec.kind == CHAIN_SUBSET
    assert dec.hole_positions == ((0,), (2,))
    # operands of the carved sub-chain are in canonical order
    assert to_text(dec.subprogram) == "((x * 2.0) + x)"
    assert to_text(dec.context) == "(_hole + y)"


def test_chain_subset_round_trip_is_semantic():
    program = add(X, Y, mul(X, TWO))
    dec = chain_subset_decomposition(program, (), (0, 2))
    rebuilt = substitute(dec.subprogram, HOLE, dec.context)
    assert rebuilt.canon_key == program.canon_key
    for got, want in zip(_eval_rows(rebuilt), _eval_rows(program)):
        assert math.isclose(got, want, rel_tol=1e-12)


def test_chain_subset_bounds():
    program = add(X, Y, mul(X, TWO))
    with pytest.raises(PositionError):
        chain_subset_decomposition(program, (), (0,))  # too few
    with pytest.raises(PositionError):
        chain_subset_decomposition(program, (), (0, 1, 2))  # nothing left
    with pytest.raises(PositionError):
        chain_subset_decomposition(program, (), (0, 9))  # out of range
    with pytest.raises(PositionError):
        chain_subset_decomposition(program, (2,), (0, 1))  # not a chain


def test_decomposition_from_holes_round_trips_both_kinds():
    occ = occurrence_decomposition(GUARDED, [(0, 0), (1,)])
    assert decomposition_from_holes(GUARDED, occ.hole_positions, OCCURRENCE) == occ
    program = add(X, Y, mul(X, TWO))
    chain = chain_subset_decomposition(program, (), (0, 2))
    assert (
        decomposition_from_holes(program, chain.hole_positions, CHAIN_SUBSET) == chain
    )


def test_paths():
    dec = occurrence_decomposition(GUARDED, [(0, 0)])
    assert dec.node_path == "0/0"
    assert dec.parent_path == "0"
    whole = occurrence_decomposition(GUARDED, [()])
    assert whole.node_path == ""
    assert whole.parent_path == "-"


# -- enumeration ----------------------------------------------------------------


def test_enumeration_count_handmade():
    decs = enumerate_decompositions(GUARDED)
    assert not decs.truncated
    occ = [d for d in decs if d.kind == OCCURRENCE]
    chains = [d for d in decs if d.kind == CHAIN_SUBSET]
    # groups: ite x1, guard x1, (x+y+x) x2, x x5, y x2 -> 1+1+3+31+3
    assert len(occ) == 39
    # two 3-chains, subsets of size 2 only -> 3 each
    assert len(chains) == 6
    assert len(decs) == 45


def test_enumeration_is_deterministic_and_sorted():
    a = enumerate_decompositions(GUARDED)
    b = enumerate_decompositions(GUARDED)
    assert list(a) == list(b)
    keys = [d.sort_key() for d in a]
    assert keys == sorted(keys)
    assert a[0].hole_positions == ((),)  # whole-program cut comes first


def test_enumeration_of_constant_program_is_empty():
    decs = enumerate_decompositions(Const(1.0))
    assert len(decs) == 0 and not decs.truncated


def test_enumeration_never_cuts_constants():
    for dec in enumerate_decompositions(GUARDED):
        assert not isinstance(dec.subprogram, Const)


def test_occurrence_cap_falls_back_to_all_plus_singletons():
    program = add(*[X] * 13)
    decs = enumerate_decompositions(program)
    assert decs.truncated
    occ = [d for d in decs if d.kind == OCCURRENCE]
    chains = [d for d in decs if d.kind == CHAIN_SUBSET]
    # x group: 13 singletons + the all-occurrences cut; plus the whole chain
    assert len(occ) == 15
    # chain cap: contiguous pairs only
    assert len(chains) == 12
    assert all(len(d.hole_positions) == 2 for d in chains)


def test_custom_caps():
    program = add(X, Y, mul(X, TWO), TWO)
    tight = enumerate_decompositions(program, EnumerationCaps(max_chain=3))
    assert tight.truncated
    pairs = [d for d in tight.items if d.kind == CHAIN_SUBSET]
    assert [d.hole_positions for d in pairs] == [
        ((0,), (1,)),
        ((1,), (2,)),
        ((2,), (3,)),
    ]


def test_enumerated_holes_are_sorted_and_identical():
    for dec in enumerate_decompositions(GUARDED):
        assert dec.hole_positions == tuple(sorted(dec.hole_positions))
        if dec.kind == OCCURRENCE:
            rebuilt = substitute(dec.subprogram, HOLE, dec.context)
            assert rebuilt == dec.program


def test_enumeration_round_trip_on_random_corpus(corpus_programs):
    for program in corpus_programs[:8]:
        decs = enumerate_decompositions(program)
        assert not decs.truncated
        for dec in decs:
            rebuilt = substitute(dec.subprogram, HOLE, dec.context)
            assert rebuilt.canon_key == program.canon_key


# -- local expressions -----------------------------------------------------------


def test_locals_for_guard_hole_include_branches():
    dec = occurrence_decomposition(GUARDED, [(0,)])  # the guard comparison
    locals_ = local_expressions(GUARDED, dec)
    assert locals_[0] == dec
    positions = [l.hole_positions for l in locals_]
    # 5 cuts inside the guard, 4 in the then-branch, 1 in the else-branch
    assert len(locals_) == 10
    assert (((1,),)) in positions and (((2,),)) in positions
    assert (((1, 1),)) in positions  # y inside the then-branch
    assert all(not isinstance(l.subprogram, Const) for l in locals_)


def test_locals_skip_commutative_mismatches():
    program = sub(add(X, Y), add(Y, X))
    dec = occurrence_decomposition(program, [(0,), (1,)])
    locals_ = local_expressions(program, dec)
    # x sits at offset 0 in one hole but offset 1 in the other: only the
    # full subprogram is jointly replaceable
    assert locals_ == [dec]


def test_locals_for_chain_subset():
    program = add(X, Y, mul(X, TWO))
    dec = chain_subset_decomposition(program, (), (0, 2))
    locals_ = local_expressions(program, dec)
    assert locals_[0] == dec
    assert [l.hole_positions for l in locals_[1:]] == [
        ((0,),),
        ((2,),),
        ((2, 0),),
    ]


def test_locals_cut_every_offset_of_every_hole():
    dec = occurrence_decomposition(GUARDED, [(0, 0), (1,)])
    locals_ = local_expressions(GUARDED, dec)
    # offsets (), 0, 1, 2 of (x + y + x), cut at both holes jointly
    assert [l.hole_positions for l in locals_] == [
        ((0, 0), (1,)),
        ((0, 0, 0), (1, 0)),
        ((0, 0, 1), (1, 1)),
        ((0, 0, 2), (1, 2)),
    ]
