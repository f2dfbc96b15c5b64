import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cse import speclang as sl
from cse.matchplan import (
    NotPlannable,
    PlanFailure,
    ins_outs_learn,
    plan,
    plannable_by_some_order,
)
from cse.parser import parse_assertion
from cse.terms import BinOp, LVar, nat


def entry_strings(p):
    return [(sl.print_assertion(e.assertion), [(x, repr(t)) for x, t in e.outs]) for e in p]


def test_learning_examples():
    ins, outs = ins_outs_learn({"x"}, parse_assertion("x -> z + 1"))
    assert outs == (("z", BinOp("-", LVar("O"), nat(1))),)
    ins, outs = ins_outs_learn({"x", "y", "z"}, parse_assertion("x <= 10"))
    assert outs == ()
    ins, outs = ins_outs_learn({"x"}, parse_assertion("x + 1 = y + 3"))
    assert outs == (("y", BinOp("-", BinOp("+", LVar("x"), nat(1)), nat(3))),)


def test_learning_failures():
    with pytest.raises(NotPlannable):
        ins_outs_learn(set(), parse_assertion("x -> y"))  # address unknown
    with pytest.raises(NotPlannable):
        ins_outs_learn({"x"}, parse_assertion("x -> y + y"))  # two occurrences
    with pytest.raises(NotPlannable):
        ins_outs_learn({"x"}, parse_assertion("x <= y"))  # inequalities never learn
    with pytest.raises(NotPlannable):
        ins_outs_learn({"x"}, parse_assertion("x -> y * 2"))  # mult needs the flag


def test_mult_inversion_behind_flag():
    ins, outs = ins_outs_learn({"x"}, parse_assertion("x -> (y * 2)"), invert_mul=True)
    assert outs == (("y", BinOp("/", LVar("O"), nat(2))),)


def test_plan_worked_example():
    mp = plan({"x"}, parse_assertion("x <= 10 * x -> y * y = z - 10"))
    assert entry_strings(mp) == [
        ("x <= 10", []),
        ("x -> y", [("y", "#O")]),
        ("y = z - 10", [("z", "#y + 10")]),
    ]


def test_plan_failure_and_permutations():
    with pytest.raises(PlanFailure):
        plan(set(), parse_assertion("x -> y"))
    # permuted components: a valid plan never starts with y = z - 10
    permuted = parse_assertion("y = z - 10 * x <= 10 * x -> y")
    mp = plan({"x"}, permuted)
    assert entry_strings(mp)[0][0] != "y = z - 10"
    items = sl.star_list(permuted)
    assert plannable_by_some_order({"x"}, items)
    assert not plannable_by_some_order(set(), [parse_assertion("x -> y")])


def test_predicate_planning():
    mp = plan({"x"}, parse_assertion("list(x; xs, vs)"))
    [(entry)] = mp
    assert entry.outs == (("xs", LVar("O1")), ("vs", LVar("O2")))
    with pytest.raises(PlanFailure):
        plan(set(), parse_assertion("list(x; xs, vs)"))
    # an out-expression over already-known variables learns nothing
    mp2 = plan({"x", "xs", "vs"}, parse_assertion("list(x; xs, vs)"))
    assert mp2[0].outs == ()


def test_plan_validity_replay():
    """Replaying any produced plan keeps every entry's ins covered."""
    rng = random.Random(11)
    for _ in range(200):
        known = {"a"}
        items = []
        pool = ["a", "b", "c", "d"]
        for _ in range(rng.randrange(1, 4)):
            kind = rng.randrange(3)
            if kind == 0:
                items.append(
                    parse_assertion(f"{rng.choice(pool)} -> {rng.choice(pool)}")
                )
            elif kind == 1:
                items.append(
                    parse_assertion(f"{rng.choice(pool)} = {rng.choice(pool)} + 1")
                )
            else:
                items.append(parse_assertion(f"{rng.choice(pool)} <= 10"))
        p = sl.star(items)
        try:
            mp = plan(set(known), p)
        except PlanFailure:
            assert not plannable_by_some_order(known, sl.star_list(p))
            continue
        k = set(known)
        for entry in mp:
            ins, outs = ins_outs_learn(k, entry.assertion)
            assert ins <= k
            k |= {x for x, _ in entry.outs}
        assert plannable_by_some_order(known, sl.star_list(p))
