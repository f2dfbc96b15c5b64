from pathlib import Path

import pytest

import cse.syntax as sx
from cse.biabduction import AntiFrame, BiabEngine, exec_biab, fix_for
from cse.concrete import Outcome
from cse.engine import Engine, EngineConfig, Mode
from cse.parser import parse_command, parse_program
from cse.solver import Solver
from cse.symstate import FREED, FreshNames, SymHeap, SymState, compose_sym
from cse.terms import (
    NIL_T,
    BinOp,
    ListTerm,
    Lit,
    PC,
    SymVar,
    TypeTest,
    VNat,
    VStr,
    mk,
    nat,
)

from _oracles import alpha_state_key, normalize_state_pc

F_SRC = """
func f(c, x) {
  if (c >= 42) { r := [x]; [x] := c } else { error("c less than 42") };
  return r
}
"""
PROG = parse_program(F_SRC)
ch, xh, vh = SymVar("c"), SymVar("x"), SymVar("v")


def biab(state, cmd, spec_ctx=None, impl_ctx=None, predicates=None, **kw):
    cfg = EngineConfig(mode=Mode.UX, **kw)
    return exec_biab(state, cmd, spec_ctx, impl_ctx or PROG.functions, cfg, predicates)


def test_fix_for_missing_cell():
    fresh = FreshNames()
    st = SymState.make(
        {"err": ListTerm((Lit(VStr("MissingCell")), Lit(VStr("a")), nat(13)))}
    )
    got = fix_for(Outcome.MISS, st, fresh)
    assert got is not None
    frame, constraints = got
    assert frame.heap.cells == ((nat(13), SymVar("v")),)
    assert constraints == [TypeTest(SymVar("v"), "Val")]


def test_fix_for_cuts_unfixable():
    fresh = FreshNames()
    st = SymState.make(
        {"err": ListTerm((Lit(VStr("consPure")), nat(1), Lit(VStr("x"))))}
    )
    assert fix_for(Outcome.ABORT, st, fresh) is None
    uaf = SymState.make({"err": Lit(mk(["UseAfterFree", "x", 1]))})
    assert fix_for(Outcome.ERR, uaf, fresh) is None


def test_fix_for_missing_predicate():
    preds = parse_program(
        "pred list(x; xs, vs) [exact] { x = nil * xs = [] * vs = [] }"
    ).predicates
    fresh = FreshNames()
    payload = ListTerm(
        (Lit(VStr("Pred")), Lit(VStr("list")), ListTerm((SymVar("a"),)), Lit(mk(True)))
    )
    st = SymState.make({"err": payload})
    got = fix_for(Outcome.ABORT, st, fresh, preds)
    assert got is not None
    frame, constraints = got
    [inst] = frame.preds
    assert inst.name == "list" and inst.ins == (SymVar("a"),) and len(inst.outs) == 2


def test_biab_overview_four_leaves():
    start = SymState.make({"c": ch, "x": xh, "r": NIL_T})
    f = PROG.functions["f"]
    leaves = biab(start, sx.Seq(f.body, sx.Assign("ret", f.ret)))
    assert len(leaves) == 4
    oks = [(st, af) for o, st, af in leaves if o is Outcome.OK]
    assert len(oks) == 1
    st, af = oks[0]
    assert af.heap.cells == ((xh, vh),)
    assert st.heap.cells == ((xh, ch),)
    assert st.store_get("ret") == vh
    errs = [af for o, _, af in leaves if o is Outcome.ERR]
    assert all(af.is_empty() for af in errs)


def test_biab_without_faults_matches_plain_ux():
    start = SymState.make({"x": NIL_T, "y": NIL_T})
    cmd = parse_command("x := 1; y := x + 1")
    leaves = biab(start, cmd)
    assert len(leaves) == 1
    o, st, af = leaves[0]
    assert o is Outcome.OK and af.is_empty()
    eng = Engine(EngineConfig(mode=Mode.UX), {}, PROG.functions, {})
    assert eng.run(start, cmd) == [(o, st)]


def test_biab_second_access_hits_fixed_cell():
    start = SymState.make({"v": NIL_T, "a": SymVar("a")}, {}, (),
                          PC((TypeTest(SymVar("a"), "Val"),)))
    cmd = parse_command("v := [a]; [a] := v + 1")
    leaves = biab(start, cmd)
    oks = [(st, af) for o, st, af in leaves if o is Outcome.OK]
    assert len(oks) == 1
    st, af = oks[0]
    assert len(af.heap) == 1  # one anti-cell, not two
    errs = [o for o, _, _ in leaves if o is not Outcome.OK]
    assert Outcome.MISS not in errs and Outcome.ABORT not in errs


def test_biab_mutate_miss_installs_then_overwrites():
    start = SymState.make({"a": nat(7)}, {}, (), PC())
    leaves = biab(start, parse_command("[a] := 5"))
    [(o, st, af)] = leaves
    assert o is Outcome.OK
    assert af.heap.cells[0][0] == nat(7)
    assert isinstance(af.heap.cells[0][1], SymVar)  # fresh-valued anti-cell
    assert st.heap.cells == ((nat(7), nat(5)),)


def test_biab_free_miss_gets_freed_anticell():
    start = SymState.make({"a": nat(7)}, {}, (), PC())
    leaves = biab(start, parse_command("free(a); q := [a]"))
    # the fix makes free succeed; the later lookup is then a true
    # use-after-free error, never fixed
    outcomes = {o for o, _, _ in leaves}
    assert outcomes == {Outcome.ERR}
    [(o, st, af)] = leaves
    assert st.store_get("err") == Lit(mk(["UseAfterFree", "a", 7]))
    assert af.heap.cells[0][1] is not FREED  # the installed cell was a value


def test_anti_frame_codomain_freshness():
    start = SymState.make({"c": ch, "x": xh, "r": NIL_T})
    f = PROG.functions["f"]
    for o, st, af in biab(start, sx.Seq(f.body, sx.Assign("ret", f.ret))):
        codomain_vars = set()
        for _, c in af.heap.cells:
            if c is not FREED:
                from cse.terms import sv

                codomain_vars |= sv(c)
        assert codomain_vars.isdisjoint(start.sym_vars())


def ux_reexecution_reproduces(leaves, start, spec_ctx=None, impl_ctx=None, predicates=None):
    """Thm-style check: each bi-abductive leaf is reachable by the plain UX
    engine from the start state composed with the anti-frame."""
    problems = []
    for o, st, af in leaves:
        solver = Solver()
        composed = compose_sym(start, af.as_state(), solver)
        assert composed is not None
        eng = Engine(
            EngineConfig(mode=Mode.UX), spec_ctx, impl_ctx or PROG.functions,
            predicates, solver
        )
        got = eng.run(composed, ux_reexecution_reproduces.cmd)
        want = alpha_state_key(o, normalize_state_pc(st, solver))
        keys = {alpha_state_key(o2, normalize_state_pc(st2, solver)) for o2, st2 in got}
        if want not in keys:
            problems.append((o, st, af))
    return problems


def test_ux_soundness_by_reexecution():
    start = SymState.make({"c": ch, "x": xh, "r": NIL_T})
    f = PROG.functions["f"]
    cmd = sx.Seq(f.body, sx.Assign("ret", f.ret))
    leaves = biab(start, cmd)
    ux_reexecution_reproduces.cmd = cmd
    assert ux_reexecution_reproduces(leaves, start) == []


def test_biab_list_client_anti_predicate():
    prog = parse_program(Path("programs/lists.cse").read_text())
    f = prog.functions["client"]
    start = SymState.make({"x": SymVar("x"), "y": NIL_T})
    cmd = sx.Seq(f.body, sx.Assign("ret", f.ret))
    leaves = exec_biab(
        start, cmd, prog.specs, prog.functions,
        EngineConfig(mode=Mode.UX), prog.predicates
    )
    assert len(leaves) == 1
    o, st, af = leaves[0]
    assert o is Outcome.ERR
    [inst] = af.preds
    assert inst.name == "list" and inst.ins == (SymVar("x"),)
