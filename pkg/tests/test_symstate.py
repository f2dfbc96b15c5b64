from cse.concrete import CState
from cse.parser import parse_program
from cse.solver import SatResult, Solver
from cse.symstate import (
    FREED,
    PredInstance,
    SymHeap,
    SymState,
    compose_sym,
    interp_state,
    satisfies,
    wf_check,
)
from cse.terms import (
    FALSE_T,
    NIL,
    PC,
    BinOp,
    SymVar,
    TypeTest,
    VList,
    VNat,
    nat,
)

LIST_PREDS = parse_program(
    """
pred list(x; xs, vs) [exact] {
  x = nil * xs = [] * vs = [];
  exists v, x2, xs2, vs2. x -> v, x2 * list(x2; xs2, vs2) * xs = x :: xs2 * vs = v :: vs2
}
"""
).predicates

a, b, x, y = SymVar("a"), SymVar("b"), SymVar("x"), SymVar("y")


def test_wf_check_examples():
    s = Solver()
    assert wf_check(SymState.make({}), s) is True
    st = SymState.make({}, {x: nat(1)}, (), PC((FALSE_T,)))
    assert wf_check(st, s) is False
    # pc does not entail address disequality
    st2 = SymState.make(
        {},
        {x: nat(1), y: nat(2)},
        (),
        PC((TypeTest(x, "Nat"), TypeTest(y, "Nat"))),
    )
    assert wf_check(st2, s) is False


def test_wf_requires_pc_to_cover_state_variables():
    s = Solver()
    st = SymState.make({"r": a})  # pc true mentions nothing
    assert wf_check(st, s) is False
    st2 = SymState.make({"r": a}, pc=PC((TypeTest(a, "Val"),)))
    assert wf_check(st2, s) is True


def test_satisfies_interpretation_example():
    # the appendix example: a cell plus a list predicate split the heap
    st = SymState.make(
        {},
        {nat(1): nat(5)},
        (PredInstance("list", (x,), (ListT([x]), ListT([nat(15)])) ),),
        PC((TypeTest(x, "Val"),)),
    )
    concrete = CState({}, {1: VNat(5), 2: VNat(15), 3: NIL})
    assert satisfies({"x": VNat(2)}, concrete, st, LIST_PREDS) is True
    # wrong interpretation: heap does not split
    assert satisfies({"x": VNat(7)}, concrete, st, LIST_PREDS) is False


def ListT(items):
    from cse.terms import ListTerm

    return ListTerm(tuple(items))


def test_satisfies_trivial_cases():
    empty = SymState.make({})
    assert satisfies({}, CState({}, {}), empty, {}) is True
    st = SymState.make({}, {x: nat(1)}, (), PC((TypeTest(x, "Nat"),)))
    assert satisfies({"x": VNat(7)}, CState({}, {}), st, {}) is False


def test_interp_state():
    st = SymState.make({"v": x}, {y: x}, (), PC((TypeTest(y, "Nat"), TypeTest(x, "Val"))))
    got = interp_state(st, {"x": VNat(5), "y": VNat(2)})
    assert got == CState({"v": VNat(5)}, {2: VNat(5)})
    assert interp_state(st, {"x": VNat(5), "y": NIL}) is None  # address not a Nat


def test_compose_sym_examples():
    s = Solver()
    st1 = SymState.make({"z": nat(0)}, {nat(1): nat(2)}, (), PC((TypeTest(x, "Val"),)))
    st2 = SymState.make({}, {x: y}, (), PC())
    got = compose_sym(st1, st2, s)
    assert got is not None
    assert len(got.heap) == 2
    # wf constraints: x in Nat, y in Val, x != 1
    assert TypeTest(x, "Nat") in got.pc.conjuncts
    assert TypeTest(y, "Val") in got.pc.conjuncts
    assert BinOp("!=", nat(1), x) in got.pc.conjuncts


def test_compose_sym_undefined_on_duplicate_address():
    s = Solver()
    st1 = SymState.make({}, {x: nat(1)})
    st2 = SymState.make({}, {x: nat(2)})
    assert compose_sym(st1, st2, s) is None


def test_compose_sym_identity_and_pred_union():
    s = Solver()
    st = SymState.make({"v": nat(0)}, {nat(1): nat(2)}, (), PC())
    unit = SymState.make({})
    got = compose_sym(st, unit, s)
    assert got.heap == st.heap and got.preds == st.preds
    p1 = PredInstance("list", (a,), ())
    p2 = PredInstance("list", (b,), ())
    got2 = compose_sym(
        SymState.make({}, {}, (p1,), PC((TypeTest(a, "Val"),))),
        SymState.make({}, {}, (p2,), PC((TypeTest(b, "Val"),))),
        s,
    )
    assert got2.preds == (p1, p2)
