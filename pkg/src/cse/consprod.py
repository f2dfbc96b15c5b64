"""The consume and produce operations with the OX/UX mode switch.

Consume removes the resource matching a *-list of simple assertions from a
symbolic state, branching over every possible match; produce adds the
resource described by an assertion. The only mode-dependent point is the
consumption of pure facts: OX requires entailment and aborts otherwise, UX
strengthens the path condition and cuts unsatisfiable branches.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Union

from . import matchplan as mp
from . import speclang as sl
from .solver import SatResult, Solver
from .symstate import FREED, PredInstance, SymState
from .terms import (
    BinOp,
    ListTerm,
    Lit,
    LVar,
    PC,
    Term,
    TypeTest,
    VStr,
    conj,
    eq,
    fold,
    neg,
    subst,
)


class Mode(enum.Enum):
    OX = "ox"
    UX = "ux"
    EX = "ex"  # core-only analyses; pure consumption behaves like OX

    @property
    def is_ux(self) -> bool:
        return self is Mode.UX


@dataclass(frozen=True, slots=True)
class ConsumeSuccess:
    theta: dict[str, Term]
    frame: SymState


@dataclass(frozen=True, slots=True)
class ConsumeAbort:
    payload: Term  # App-style encoding, e.g. ["consPure", pi, pc]
    pc: PC

    @property
    def kind(self) -> str:
        if isinstance(self.payload, ListTerm) and self.payload.items:
            head = self.payload.items[0]
            if isinstance(head, Lit) and isinstance(head.value, VStr):
                return head.value.s
        return "?"


ConsumeResult = Union[ConsumeSuccess, ConsumeAbort]

_CUT = object()
_ABORT = object()


@dataclass
class Stats:
    cuts: int = 0
    unknowns: int = 0
    trace: Optional[list] = None

    def log(self, rule: str, detail: str = "") -> None:
        if self.trace is not None:
            self.trace.append(f"{rule}: {detail}" if detail else rule)


def theta_apply(theta: dict[str, Term], e: Term) -> Term:
    """Apply a substitution to a logical expression; unmapped variables are
    a planning bug and raise."""
    missing = {x for x in _lvars(e) if x not in theta}
    if missing:
        raise KeyError(f"substitution does not cover {sorted(missing)}")
    return fold(subst(e, {LVar(x): t for x, t in theta.items()}))


def _lvars(e: Term) -> set[str]:
    from .terms import lv

    return lv(e)


def cons_pure(
    solver: Solver, mode: Mode, pc: PC, phi: Term, stats: Stats
) -> Union[PC, object]:
    """Fig.-style consPure: UX strengthens (or cuts), OX checks entailment
    (or aborts). Solver Unknown aborts in OX and cuts in UX, preserving each
    mode's guarantee direction."""
    phi = fold(phi)
    if mode.is_ux:
        new = solver.extend_pc(pc, phi)
        res = solver.check_sat(new)
        if res is SatResult.SAT:
            return new
        if res is SatResult.UNKNOWN:
            stats.unknowns += 1
        stats.cuts += 1
        return _CUT
    ent = solver.entails(pc, phi)
    if ent is True:
        return solver.extend_pc(pc, phi)  # entailed facts are absorbed, pc unchanged
    if ent is SatResult.UNKNOWN:
        stats.unknowns += 1
    return _ABORT


def _not_in_dom(addr: Term, state: SymState) -> Term:
    return conj([neg(eq(addr, a)) for a in state.heap.addresses()])


def cons_cell(
    solver: Solver, mode: Mode, addr: Term, state: SymState, stats: Stats
):
    """Branch over all cell consumptions; the final element may be _ABORT
    when the address can point outside the heap."""
    branches = []
    for i, (a, content) in enumerate(state.heap.cells):
        pc2 = solver.extend_pc(state.pc, eq(addr, a))
        res = solver.check_sat(pc2)
        if res is SatResult.UNKNOWN:
            stats.unknowns += 1
            if mode.is_ux:
                stats.cuts += 1
                continue
        elif res is SatResult.UNSAT:
            continue
        branches.append((content, state.with_heap(state.heap.without_index(i)).with_pc(pc2)))
    miss = _not_in_dom(addr, state)
    pc_miss = solver.extend_pc(state.pc, miss)
    res = solver.check_sat(pc_miss)
    if res is SatResult.SAT or (res is SatResult.UNKNOWN and not mode.is_ux):
        if res is SatResult.UNKNOWN:
            stats.unknowns += 1
        branches.append((_ABORT, state.with_pc(pc_miss)))
    return branches


def cons_pred(
    solver: Solver, mode: Mode, name: str, ins: tuple[Term, ...], state: SymState, stats: Stats
):
    """Branch over all predicate-instance consumptions, plus the no-match
    abort branch when its condition is satisfiable."""
    branches = []
    same = [
        (k, p)
        for k, p in enumerate(state.preds)
        if p.name == name and len(p.ins) == len(ins)
    ]
    for k, p in same:
        eqs = [eq(a, b) for a, b in zip(ins, p.ins)]
        pc2 = solver.extend_pc(state.pc, *eqs)
        res = solver.check_sat(pc2)
        if res is SatResult.UNKNOWN:
            stats.unknowns += 1
            if mode.is_ux:
                stats.cuts += 1
                continue
        elif res is SatResult.UNSAT:
            continue
        rest = state.preds[:k] + state.preds[k + 1 :]
        branches.append((p.outs, state.with_preds(rest).with_pc(pc2)))
    if not same:
        branches.append((_ABORT, state))
        return branches
    matches = conj([conj([eq(a, b) for a, b in zip(ins, p.ins)]) for _, p in same])
    pc_ab = solver.extend_pc(state.pc, neg(matches))
    res = solver.check_sat(pc_ab)
    if res is SatResult.SAT or (res is SatResult.UNKNOWN and not mode.is_ux):
        if res is SatResult.UNKNOWN:
            stats.unknowns += 1
        branches.append((_ABORT, state.with_pc(pc_ab)))
    return branches


def _abort_payload(tag: str, *rest: Term) -> Term:
    return fold(ListTerm((Lit(VStr(tag)),) + rest))


def _learn_outs(
    solver: Solver,
    mode: Mode,
    theta: dict[str, Term],
    outs: tuple[tuple[str, Term], ...],
    placeholders: dict[str, Term],
    pc: PC,
    stats: Stats,
):
    """Extend theta per the out recipes. An already-bound variable adds an
    equality consumption instead of a rebind. Returns one of
    ("ok", theta', pc'), ("cut", None, None), ("abort", failed_check, pc)."""
    th = dict(theta)
    extra = dict(th)
    extra.update(placeholders)
    pending_eqs: list[Term] = []
    for x, recipe in outs:
        v = theta_apply(extra, recipe)
        if x in th:
            pending_eqs.append(eq(th[x], v))
        else:
            th[x] = v
            extra[x] = v
    for e in pending_eqs:
        got = cons_pure(solver, mode, pc, e, stats)
        if got is _CUT:
            return "cut", None, None
        if got is _ABORT:
            return "abort", e, pc
        pc = got
    return "ok", th, pc


def consume(
    solver: Solver,
    mode: Mode,
    p: sl.Assertion,
    theta: dict[str, Term],
    state: SymState,
    stats: Optional[Stats] = None,
    invert_mul: bool = False,
) -> list[ConsumeResult]:
    """mac: plan the assertion, then consume entry by entry, branching."""
    stats = stats or Stats()
    the_plan = mp.plan(set(theta), p, invert_mul)
    stats.log("plan", " :: ".join(repr(e) for e in the_plan))
    results: list[ConsumeResult] = []
    _mac_mp(solver, mode, list(the_plan), theta, state, stats, results)
    return results


def _mac_mp(
    solver: Solver,
    mode: Mode,
    entries: list[mp.PlanEntry],
    theta: dict[str, Term],
    state: SymState,
    stats: Stats,
    results: list[ConsumeResult],
) -> None:
    if not entries:
        results.append(ConsumeSuccess(theta, state))
        return
    head, rest = entries[0], entries[1:]
    p = head.assertion

    if isinstance(p, sl.Pure):
        status, theta2, pc = _learn_outs(solver, mode, theta, head.outs, {}, state.pc, stats)
        if status == "abort":
            results.append(
                ConsumeAbort(_abort_payload("consPure", theta2, pc.term()), pc)
            )
            return
        if status == "cut":
            return
        phi = theta_apply(theta2, p.expr)
        out = cons_pure(solver, mode, pc, phi, stats)
        if out is _ABORT:
            stats.log("consPure-fail", repr(phi))
            results.append(ConsumeAbort(_abort_payload("consPure", phi, pc.term()), pc))
            return
        if out is _CUT:
            stats.log("consPure-cut", repr(phi))
            return
        stats.log("consPure", repr(phi))
        _mac_mp(solver, mode, rest, theta2, state.with_pc(out), stats, results)
        return

    if isinstance(p, (sl.Cell, sl.CellFreed)):
        addr = theta_apply(theta, p.addr)
        typed = cons_pure(solver, mode, state.pc, TypeTest(addr, "Nat"), stats)
        if typed is _ABORT:
            results.append(
                ConsumeAbort(
                    _abort_payload("consPure", TypeTest(addr, "Nat"), state.pc.term()),
                    state.pc,
                )
            )
            return
        if typed is _CUT:
            return
        st = state.with_pc(typed)
        for content, st2 in cons_cell(solver, mode, addr, st, stats):
            if content is _ABORT:
                tag = "MissingCell" if isinstance(p, sl.Cell) else "MissingNegCell"
                stats.log(tag, repr(addr))
                results.append(ConsumeAbort(_abort_payload(tag, addr, st2.pc.term()), st2.pc))
                continue
            if isinstance(p, sl.CellFreed):
                if content is not FREED:
                    results.append(
                        ConsumeAbort(_abort_payload("consError", st2.pc.term()), st2.pc)
                    )
                    continue
                stats.log("consCell-freed", repr(addr))
                _mac_mp(solver, mode, rest, theta, st2, stats, results)
                continue
            if content is FREED:
                results.append(
                    ConsumeAbort(_abort_payload("consError", st2.pc.term()), st2.pc)
                )
                continue
            status, theta2, pc2 = _learn_outs(
                solver, mode, theta, head.outs, {"O": content}, st2.pc, stats
            )
            if status == "abort":
                results.append(
                    ConsumeAbort(_abort_payload("consPure", theta2, pc2.term()), pc2)
                )
                continue
            if status == "cut":
                continue
            check = eq(theta_apply(theta2, p.content), content)
            out = cons_pure(solver, mode, pc2, check, stats)
            if out is _ABORT:
                results.append(ConsumeAbort(_abort_payload("consPure", check, pc2.term()), pc2))
                continue
            if out is _CUT:
                continue
            stats.log("consCell", f"{addr!r} -> {content!r}")
            _mac_mp(solver, mode, rest, theta2, st2.with_pc(out), stats, results)
        return

    if isinstance(p, sl.PredAssert):
        ins = tuple(theta_apply(theta, e) for e in p.ins)
        typing = conj([TypeTest(t, "Val") for t in ins])
        typed = cons_pure(solver, mode, state.pc, typing, stats)
        if typed is _ABORT:
            results.append(
                ConsumeAbort(_abort_payload("consError", state.pc.term()), state.pc)
            )
            return
        if typed is _CUT:
            return
        st = state.with_pc(typed)
        for outs_vals, st2 in cons_pred(solver, mode, p.name, ins, st, stats):
            if outs_vals is _ABORT:
                stats.log("Pred-miss", p.name)
                results.append(
                    ConsumeAbort(
                        _abort_payload(
                            "Pred", Lit(VStr(p.name)), ListTerm(ins), st2.pc.term()
                        ),
                        st2.pc,
                    )
                )
                continue
            placeholders = {f"O{i}": v for i, v in enumerate(outs_vals, start=1)}
            status, theta2, pc2 = _learn_outs(
                solver, mode, theta, head.outs, placeholders, st2.pc, stats
            )
            if status == "abort":
                results.append(
                    ConsumeAbort(_abort_payload("consPure", theta2, pc2.term()), pc2)
                )
                continue
            if status == "cut":
                continue
            checks = conj(
                [eq(theta_apply(theta2, e), v) for e, v in zip(p.outs, outs_vals)]
            )
            out = cons_pure(solver, mode, pc2, checks, stats)
            if out is _ABORT:
                results.append(ConsumeAbort(_abort_payload("consPure", checks, pc2.term()), pc2))
                continue
            if out is _CUT:
                continue
            stats.log("consPred", p.name)
            _mac_mp(solver, mode, rest, theta2, st2.with_pc(out), stats, results)
        return

    if isinstance(p, sl.Emp):
        _mac_mp(solver, mode, rest, theta, state, stats, results)
        return

    raise sl.UnsupportedAssertion(f"consume cannot handle {p!r}")


# ---------------------------------------------------------------------------
# Produce


def prod_cell(
    solver: Solver, addr: Term, content, state: SymState, stats: Stats
) -> Optional[SymState]:
    pc2 = solver.extend_pc(state.pc, _not_in_dom(addr, state))
    res = solver.check_sat(pc2)
    if res is not SatResult.SAT:
        if res is SatResult.UNKNOWN:
            stats.unknowns += 1
        stats.cuts += 1
        stats.log("prodCell-cut", repr(addr))
        return None
    stats.log("prodCell", repr(addr))
    return state.with_heap(state.heap.with_cell(addr, content)).with_pc(pc2)


def produce(
    solver: Solver,
    q: sl.Assertion,
    theta: dict[str, Term],
    state: SymState,
    stats: Optional[Stats] = None,
) -> list[SymState]:
    """Extend the state with the resource described by `q` under theta;
    unsatisfiable results are cut. Disjunctions branch; implications and
    non-top-level existentials are not supported."""
    stats = stats or Stats()

    if isinstance(q, sl.Implies):
        raise sl.UnsupportedAssertion("produce does not support implications")
    if isinstance(q, sl.Exists):
        raise sl.UnsupportedAssertion("existentials must be instantiated before produce")
    if isinstance(q, sl.AFalse):
        stats.cuts += 1
        return []
    if isinstance(q, sl.Emp):
        return [state]
    if isinstance(q, sl.Pure):
        phi = theta_apply(theta, q.expr)
        pc2 = solver.extend_pc(state.pc, phi)
        res = solver.check_sat(pc2)
        if res is not SatResult.SAT:
            if res is SatResult.UNKNOWN:
                stats.unknowns += 1
            stats.cuts += 1
            stats.log("produce-pure-cut", repr(phi))
            return []
        stats.log("produce-pure", repr(phi))
        return [state.with_pc(pc2)]
    if isinstance(q, sl.Cell):
        addr = theta_apply(theta, q.addr)
        content = theta_apply(theta, q.content)
        pc2 = solver.extend_pc(
            state.pc, TypeTest(addr, "Nat"), TypeTest(content, "Val")
        )
        st = prod_cell(solver, addr, content, state.with_pc(pc2), stats)
        return [st] if st is not None else []
    if isinstance(q, sl.CellFreed):
        addr = theta_apply(theta, q.addr)
        pc2 = solver.extend_pc(state.pc, TypeTest(addr, "Nat"))
        st = prod_cell(solver, addr, FREED, state.with_pc(pc2), stats)
        return [st] if st is not None else []
    if isinstance(q, sl.Star):
        states = [state]
        for part in q.parts:
            nxt: list[SymState] = []
            for st in states:
                nxt.extend(produce(solver, part, theta, st, stats))
            states = nxt
        return states
    if isinstance(q, sl.AOr):
        return produce(solver, q.left, theta, state, stats) + produce(
            solver, q.right, theta, state, stats
        )
    if isinstance(q, sl.PredAssert):
        ins = tuple(theta_apply(theta, e) for e in q.ins)
        outs = tuple(theta_apply(theta, e) for e in q.outs)
        typing = [TypeTest(t, "Val") for t in ins + outs]
        pc2 = solver.extend_pc(state.pc, *typing)
        res = solver.check_sat(pc2)
        if res is not SatResult.SAT:
            if res is SatResult.UNKNOWN:
                stats.unknowns += 1
            stats.cuts += 1
            stats.log("produce-pred-cut", q.name)
            return []
        stats.log("produce-pred", q.name)
        inst = PredInstance(q.name, ins, outs)
        return [state.with_preds(state.preds + (inst,)).with_pc(pc2)]
    raise sl.UnsupportedAssertion(f"produce cannot handle {q!r}")
