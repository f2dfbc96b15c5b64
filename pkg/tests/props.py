"""Randomized instance generation and checking for the consume/produce
axiomatic-interface properties. The acceptance suite runs these at full
size; module tests run smaller counts."""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from typing import Optional

from cse import speclang as sl
from cse.concrete import CState
from cse.consprod import ConsumeAbort, ConsumeSuccess, Mode, Stats, consume, produce
from cse.matchplan import PlanFailure
from cse.parser import parse_program
from cse.solver import Solver, eval_under
from cse.symstate import FREED, PredInstance, SymHeap, SymState, rest_heap, wf_check
from cse.terms import (
    NIL,
    TRUE,
    BinOp,
    Lit,
    LVar,
    PC,
    SymVar,
    Term,
    TypeTest,
    VBool,
    VNat,
    Value,
    eq,
    mk,
    nat,
)

DOMAIN: list[Value] = [VNat(0), VNat(1), VNat(2), VNat(5), VNat(10), NIL, VBool(True)]

CELLP = parse_program("pred cellp(x; y) [exact] { x -> y }").predicates
SYMS = ("a", "b", "c", "d")
LVARS = ("x", "y", "z")


@dataclass
class Instance:
    state: SymState
    theta: dict[str, Term]
    assertion: sl.Assertion
    produce_theta: dict[str, Term]


def _rand_term(rng: random.Random) -> Term:
    if rng.random() < 0.5:
        return SymVar(rng.choice(SYMS))
    return Lit(rng.choice(DOMAIN))


def make_instance(rng: random.Random, with_preds: bool = True) -> Optional[Instance]:
    """A well-formed symbolic state plus a plannable assertion and coverage
    substitutions, or None when the random draw is unsatisfiable."""
    solver = Solver()
    heap_cells = []
    used_addrs: list[Term] = []
    for _ in range(rng.randrange(0, 4)):
        addr = _rand_term(rng) if rng.random() < 0.5 else nat(rng.choice((0, 1, 5)))
        if addr in used_addrs:
            continue
        used_addrs.append(addr)
        content = FREED if rng.random() < 0.1 else _rand_term(rng)
        heap_cells.append((addr, content))
    preds = ()
    if with_preds and rng.random() < 0.5:
        preds = tuple(
            PredInstance("cellp", (_rand_term(rng),), (_rand_term(rng),))
            for _ in range(rng.randrange(1, 3))
        )
    pc = PC()
    for s in SYMS:
        pc = pc.and_raw(TypeTest(SymVar(s), "Val"))
    from cse.symstate import heap_wf_constraints

    heap = SymHeap(tuple(heap_cells))
    pc = pc.and_raw(*heap_wf_constraints(heap))
    for p in preds:
        for t in p.ins + p.outs:
            pc = pc.and_raw(TypeTest(t, "Val"))
    for _ in range(rng.randrange(0, 3)):
        s = SymVar(rng.choice(SYMS))
        kind = rng.randrange(3)
        if kind == 0:
            pc = pc.and_raw(TypeTest(s, "Nat"))
        elif kind == 1:
            pc = pc.and_raw(BinOp(rng.choice((">", "<=")), s, nat(rng.choice((0, 1, 5)))))
        else:
            pc = pc.and_raw(BinOp("!=", s, _rand_term(rng)))
    state = SymState.make({"g": SymVar("a")}, heap, preds, pc)
    if solver.check_sat(state.pc).value != "sat":
        return None

    theta: dict[str, Term] = {"x": _rand_term(rng)}
    if rng.random() < 0.5:
        theta["w"] = _rand_term(rng)

    parts: list[sl.Assertion] = []
    known = set(theta)
    learnable = list(LVARS)
    for _ in range(rng.randrange(1, 4)):
        kind = rng.randrange(5 if preds else 4)
        if kind == 0:
            out = learnable.pop(0) if learnable and rng.random() < 0.7 else None
            content = sl.lvar(out) if out else Lit(rng.choice(DOMAIN))
            parts.append(sl.Cell(sl.lvar("x"), content))
            if out:
                known.add(out)
        elif kind == 1:
            parts.append(sl.Pure(BinOp("<=", sl.lvar("x"), nat(10))))
        elif kind == 2:
            if learnable and rng.random() < 0.6:
                out = learnable.pop(0)
                parts.append(sl.Pure(eq(sl.lvar(out), BinOp("+", sl.lvar("x"), nat(1)))))
                known.add(out)
            else:
                parts.append(sl.Pure(eq(sl.lvar("x"), _lift(rng))))
        elif kind == 3:
            parts.append(sl.Pure(TypeTest(sl.lvar("x"), "Val")))
        else:
            out = learnable.pop(0) if learnable else None
            parts.append(
                sl.PredAssert("cellp", (sl.lvar("x"),), (sl.lvar(out) if out else nat(1),))
            )
            if out:
                known.add(out)
    assertion = sl.star(parts)

    produce_theta = dict(theta)
    for v in sorted(sl.lv(assertion) - set(produce_theta)):
        produce_theta[v] = _rand_term(rng)
    return Instance(state, theta, assertion, produce_theta)


def _lift(rng: random.Random) -> Term:
    return Lit(rng.choice(DOMAIN))


# ---------------------------------------------------------------------------
# Model machinery


def pc_models(pc: PC, extra_vars=()) -> list[dict]:
    names = sorted(pc.sym_vars() | set(extra_vars))
    term = pc.term()
    out = []
    for combo in itertools.product(DOMAIN, repeat=len(names)):
        interp = dict(zip(names, combo))
        if eval_under(term, interp) == TRUE:
            out.append(interp)
            if len(out) >= 24:  # cap per instance; a bound choice
                break
    return out


def state_models(state: SymState, interp) -> list[CState]:
    """Concrete states modelled by `state` under `interp` (predicates give
    several); empty when the interpretation does not fit."""
    from cse.symstate import interp_heap

    store = {}
    for x, t in state.store:
        v = eval_under(t, interp)
        if not isinstance(v, Value):
            return []
        store[x] = v
    own = interp_heap(state.heap, interp)
    if own is None:
        return []
    outs: list[CState] = []
    for extra in _pred_heaps(state.preds, interp):
        if set(extra) & set(own):
            continue
        outs.append(CState(store, {**own, **extra}))
    return outs


def _pred_heaps(preds, interp):
    if not preds:
        yield {}
        return
    p, rest = preds[0], preds[1:]
    args = [eval_under(t, interp) for t in p.ins + p.outs]
    if not all(isinstance(v, Value) for v in args):
        return
    d = CELLP[p.name]
    theta = dict(zip(d.ins + d.outs, args))
    for binders, parts in d.disjuncts:
        q = sl.Exists(binders, sl.star(parts)) if binders else sl.star(parts)
        for h in sl.assertion_heaps(theta, q, CELLP, DOMAIN):
            for h2 in _pred_heaps(rest, interp):
                if set(h) & set(h2):
                    continue
                yield {**h, **h2}


def theta_concrete(theta: dict[str, Term], interp) -> Optional[dict[str, Value]]:
    out = {}
    for k, t in theta.items():
        v = eval_under(t, interp)
        if not isinstance(v, Value):
            return None
        out[k] = v
    return out


# ---------------------------------------------------------------------------
# The seven properties


def removed_resource(inst: Instance, res: ConsumeSuccess) -> Optional[SymState]:
    heap_p = rest_heap(inst.state.heap, res.frame.heap)
    if heap_p is None:
        return None
    preds = list(inst.state.preds)
    for q in res.frame.preds:
        preds.remove(q)
    return SymState((), heap_p, tuple(preds), res.frame.pc)


def check_instance(inst: Instance, mode: Mode, solver: Solver) -> list[str]:
    problems: list[str] = []
    try:
        results = consume(solver, mode, inst.assertion, dict(inst.theta), inst.state)
    except PlanFailure:
        return problems
    successes = [r for r in results if isinstance(r, ConsumeSuccess)]
    aborts = [r for r in results if isinstance(r, ConsumeAbort)]

    for res in successes:
        # Prop 1: store unchanged, frame well-formed, substitution wf
        if res.frame.store != inst.state.store:
            problems.append("P1: store altered")
        wf = wf_check(res.frame, solver)
        if wf is False:
            problems.append("P1: frame not well-formed")
        for t in res.theta.values():
            if solver.entails(res.frame.pc, TypeTest(t, "Val")) is False:
                problems.append("P1: substitution maps into Undef")
        # Prop 2: path strengthening
        for m in pc_models(res.frame.pc, extra_vars=inst.state.pc.sym_vars()):
            if eval_under(inst.state.pc.term(), m) != TRUE:
                problems.append("P2: consume pc model escapes input pc")
                break
        # Prop 3: coverage
        if not set(inst.theta) <= set(res.theta):
            problems.append("P3: substitution shrank")
        if not sl.lv(inst.assertion) <= set(res.theta):
            problems.append("P3: assertion not covered")
        # Prop 4: soundness of the removed resource
        sp = removed_resource(inst, res)
        if sp is None:
            problems.append("P4: frame resource is not a sub-resource")
        else:
            for m in pc_models(sp.pc, extra_vars=_all_vars(inst)):
                tc = theta_concrete(res.theta, m)
                if tc is None:
                    continue
                for concrete in state_models(sp, m):
                    got = sl.assertion_sat(tc, concrete, inst.assertion, CELLP)
                    if got is not True:
                        problems.append("P4: removed resource has a non-P model")
                        break

    # Prop 5: OX completeness (no aborts -> every model extends to a branch)
    if mode is Mode.OX and not aborts:
        for m in pc_models(inst.state.pc):
            if not state_models(inst.state, m):
                continue
            if not any(
                eval_under(res.frame.pc.term(), m) == TRUE
                and state_models(res.frame, m)
                for res in successes
            ):
                problems.append("P5: model dropped by OX consume")
                break

    # Prop 6: UX completeness
    if mode is Mode.UX:
        for res in successes:
            sp = removed_resource(inst, res)
            if sp is None:
                continue
            for m in pc_models(res.frame.pc, extra_vars=_all_vars(inst)):
                tc = theta_concrete(res.theta, m)
                if tc is None:
                    problems.append("P6: theta' not interpretable")
                    break
                for _, hp in _assertion_models_capped(tc, inst.assertion):
                    if not any(
                        c.heap == hp for c in state_models(sp, m)
                    ):
                        problems.append("P6: P-model not a model of the removed state")
                        break
                    for frame_model in state_models(res.frame, m)[:6]:
                        if set(frame_model.heap) & set(hp):
                            continue
                        combined = CState(
                            frame_model.store, {**frame_model.heap, **hp}
                        )
                        if not any(
                            c.freeze() == combined.freeze()
                            for c in state_models(inst.state, m)
                        ):
                            problems.append("P6: recomposition escapes the input state")
                            break
                    break  # one P-model per pc-model keeps the check affordable
                break
    return problems


def _assertion_models_capped(theta_conc, assertion, cap: int = 4):
    out = []
    for heap in sl.assertion_heaps(theta_conc, assertion, CELLP, DOMAIN):
        out.append((dict(theta_conc), heap))
        if len(out) >= cap:
            break
    return out


def _all_vars(inst: Instance) -> set[str]:
    out = set(inst.state.pc.sym_vars()) | inst.state.sym_vars()
    for t in inst.theta.values():
        from cse.terms import sv

        out |= sv(t)
    return out


def check_produce_instance(inst: Instance, solver: Solver) -> list[str]:
    problems: list[str] = []
    stats = Stats()
    states = produce(solver, inst.assertion, dict(inst.produce_theta), inst.state, stats)
    for st in states:
        if st.store != inst.state.store:
            problems.append("P1(produce): store altered")
        if wf_check(st, solver) is False:
            problems.append("P1(produce): output not well-formed")
        for m in pc_models(st.pc, extra_vars=inst.state.pc.sym_vars()):
            if eval_under(inst.state.pc.term(), m) != TRUE:
                problems.append("P2(produce): pc model escapes input pc")
                break
        sp = SymState(
            (),
            rest_heap(st.heap, inst.state.heap) or SymHeap(),
            st.preds[len(inst.state.preds):],
            st.pc,
        )
        for m in pc_models(st.pc, extra_vars=_all_vars(inst)):
            tc = theta_concrete(inst.produce_theta, m)
            if tc is None:
                continue
            for concrete in state_models(sp, m)[:4]:
                got = sl.assertion_sat(tc, concrete, inst.assertion, CELLP)
                if got is not True:
                    problems.append("P4(produce): added resource has a non-P model")
                    break

    # Prop 7: produce completeness
    for m in pc_models(inst.state.pc):
        tc = theta_concrete(inst.produce_theta, m)
        if tc is None:
            continue
        base_models = state_models(inst.state, m)
        if not base_models:
            continue
        for _, hp in _assertion_models_capped(tc, inst.assertion, cap=2):
            if any(set(hp) & set(c.heap) for c in base_models):
                continue  # incompatible footprints; the property premises fail
            ok = any(
                eval_under(st.pc.term(), m) == TRUE
                and any(
                    set(extra.heap) == set(hp) and extra.heap == hp
                    for extra in state_models(
                        SymState((), rest_heap(st.heap, inst.state.heap) or SymHeap(),
                                 st.preds[len(inst.state.preds):], st.pc),
                        m,
                    )
                )
                for st in states
            )
            if not ok:
                problems.append("P7: compatible model rejected by produce")
            break
        break
    return problems
