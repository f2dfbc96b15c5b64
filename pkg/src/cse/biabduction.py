"""UX bi-abduction: catch missing-resource leaves, synthesise fixes,
re-execute, and accumulate anti-frames.

Implements the catch-fix-continue formulation: a Miss outcome (or a consume
abort carrying missing resource) produces a fix that is composed into the
state before the same command is re-executed. Fixed branches never surface
Miss or Abort; unfixable aborts are cut.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from . import syntax as sx
from .concrete import Outcome
from .engine import Engine, EngineConfig, Mode, RunStats
from .symstate import FreshNames, PredInstance, SymHeap, SymState, compose_sym
from .terms import (
    FREED,
    NIL_T,
    UNDEF,
    ListTerm,
    Lit,
    VList,
    PC,
    SymVar,
    Term,
    TypeTest,
    VStr,
    neg,
    pretty,
    sv,
)


@dataclass(frozen=True, slots=True)
class AntiFrame:
    heap: SymHeap = field(default_factory=SymHeap)
    preds: tuple[PredInstance, ...] = ()

    def is_empty(self) -> bool:
        return not self.heap.cells and not self.preds

    def union(self, other: AntiFrame) -> Optional[AntiFrame]:
        seen = set(self.heap.addresses())
        for a in other.heap.addresses():
            if a in seen:
                return None
        return AntiFrame(
            SymHeap(self.heap.cells + other.heap.cells), self.preds + other.preds
        )

    def domain_sym_vars(self) -> set[str]:
        out: set[str] = set()
        for a, _ in self.heap.cells:
            out |= sv(a)
        for p in self.preds:
            for t in p.ins:
                out |= sv(t)
        return out

    def as_state(self, pc: PC = PC()) -> SymState:
        return SymState((), self.heap, self.preds, pc)

    def __repr__(self) -> str:
        return f"({self.heap!r}, {{{', '.join(map(repr, self.preds))}}})"


EMPTY_FRAME = AntiFrame()


def _errval_expr(e: Term) -> Term:
    from .terms import pretty

    return ListTerm((Lit(VStr("ExprEval")), Lit(VStr(pretty(e)))))


def _errval_type(e: Term, v: Term, ty: str) -> Term:
    from .terms import pretty

    return ListTerm((Lit(VStr("Type")), Lit(VStr(pretty(e))), v, Lit(VStr(ty))))


def _errval_tag(tag: str, name: str) -> Term:
    return ListTerm((Lit(VStr(tag)), Lit(VStr(name))))


def _payload_of(state: SymState) -> Optional[ListTerm]:
    t = state.store_get("err")
    if isinstance(t, Lit) and isinstance(t.value, VList):  # folded ground payload
        t = ListTerm(tuple(Lit(v) for v in t.value.items))
    if isinstance(t, ListTerm) and t.items and isinstance(t.items[0], Lit):
        head = t.items[0].value
        if isinstance(head, VStr):
            return t
    return None


def fix_for(
    outcome: Outcome, state: SymState, fresh: FreshNames, predicates=None
) -> Optional[tuple[AntiFrame, list[Term]]]:
    """Construct a fix from a missing-resource leaf; None cuts the branch.

    A missing cell at address a yields the anti-cell a -> fresh v (in Val);
    a missing freed cell yields a -> freed; a missing predicate yields an
    instance with fresh outs. Everything else (consPure, consError, language
    errors such as use-after-free) has no fix.
    """
    payload = _payload_of(state)
    if payload is None:
        return None
    tag = payload.items[0].value.s
    if outcome is Outcome.MISS and tag in ("MissingCell", "MissingNegCell"):
        # Command-level misses (lookup/mutate/free) all need an allocated
        # value cell; a freed-marker anti-cell would only recreate the fault
        # as a use-after-free.
        if len(payload.items) != 3:
            return None
        addr = payload.items[2]
        v = fresh.fresh_var("v")
        return AntiFrame(SymHeap(((addr, v),))), [TypeTest(v, "Val")]
    if outcome is Outcome.ABORT:
        if tag == "MissingCell" and len(payload.items) == 3:
            v = fresh.fresh_var("v")
            return AntiFrame(SymHeap(((payload.items[1], v),))), [TypeTest(v, "Val")]
        if tag == "MissingNegCell" and len(payload.items) == 3:
            return AntiFrame(SymHeap(((payload.items[1], FREED),))), []
        if tag == "Pred" and len(payload.items) == 4:
            name = payload.items[1].value.s
            ins_term = payload.items[2]
            d = (predicates or {}).get(name)
            if d is None or not isinstance(ins_term, ListTerm):
                return None
            outs = tuple(fresh.fresh_var(o) for o in d.outs)
            inst = PredInstance(name, ins_term.items, outs)
            return AntiFrame(SymHeap(), (inst,)), [TypeTest(t, "Val") for t in outs]
    return None


@dataclass
class BiabStats(RunStats):
    fixes: int = 0
    unfixable_cuts: int = 0
    fix_loop_cuts: int = 0
    frame_clash_cuts: int = 0


class BiabEngine:
    """Bi-abductive layer over a UX engine."""

    def __init__(self, engine: Engine, max_fixes_per_cmd: int = 32):
        if engine.cfg.mode is not Mode.UX:
            raise ValueError("bi-abduction runs on the UX engine")
        self.engine = engine
        self.max_fixes = max_fixes_per_cmd
        self._inline_depth = engine.cfg.fuel
        self.stats: BiabStats = (
            engine.stats
            if isinstance(engine.stats, BiabStats)
            else BiabStats(**engine.stats.__dict__)
        )
        engine.stats = self.stats

    def run(self, state: SymState, cmd: sx.Cmd) -> list[tuple[Outcome, SymState, AntiFrame]]:
        self.engine.fresh.used |= state.sym_vars()
        return list(self._exec(state, cmd))

    def _exec(self, state: SymState, cmd: sx.Cmd):
        if isinstance(cmd, sx.Seq):
            for o1, st1, af1 in self._exec(state, cmd.first):
                if o1 is not Outcome.OK:
                    yield o1, st1, af1
                    continue
                allocated = st1.sym_vars() - state.sym_vars()
                for o2, st2, af2 in self._exec(st1, cmd.second):
                    if af2.domain_sym_vars() & allocated:
                        self.stats.frame_clash_cuts += 1
                        continue
                    union = af1.union(af2)
                    if union is None:
                        self.stats.frame_clash_cuts += 1
                        continue
                    yield o2, st2, union
            return
        # Conditionals are traversed structurally so a fix applies at the
        # faulting command, not by re-running the whole branch point.
        if isinstance(cmd, sx.IfElse):
            eng = self.engine
            store = state.store_dict()
            for w, pc2 in eng._eval(store, state.pc, cmd.cond):
                from .terms import UNDEF, neg

                if w is UNDEF:
                    yield (
                        Outcome.ERR,
                        eng._err_state(state, pc2, _errval_expr(cmd.cond)),
                        EMPTY_FRAME,
                    )
                    continue
                pc_then = eng.solver.extend_pc(pc2, w)
                if eng._admit(pc_then):
                    yield from self._exec(state.with_pc(pc_then), cmd.then)
                pc_else = eng.solver.extend_pc(pc2, neg(w))
                if eng._admit(pc_else):
                    yield from self._exec(state.with_pc(pc_else), cmd.els)
                pc_ty = eng.solver.extend_pc(pc2, TypeTest(w, "Bool", positive=False))
                if eng._admit(pc_ty):
                    yield (
                        Outcome.ERR,
                        eng._err_state(state, pc_ty, _errval_type(cmd.cond, w, "Bool")),
                        EMPTY_FRAME,
                    )
            return
        # Inlined calls are traversed structurally too; spec calls stay atomic
        # (their consume aborts are pruned cleanly after a fix).
        if isinstance(cmd, sx.FCall) and not self._has_specs(cmd.fname):
            yield from self._exec_inline_call(state, cmd)
            return
        yield from self._exec_atomic(state, cmd, self.max_fixes)

    def _has_specs(self, fname: str) -> bool:
        from . import speclang as sl

        return (
            self.engine.cfg.call_style != "inline-only"
            and bool(sl.specs_for(self.engine.spec_ctx, fname, Mode.UX.value))
        )

    def _exec_inline_call(self, state: SymState, c: sx.FCall):
        eng = self.engine
        store = state.store_dict()
        if c.fname not in eng.impl_ctx:
            yield (
                Outcome.ERR,
                eng._err_state(state, state.pc, _errval_tag("NoFunc", c.fname)),
                EMPTY_FRAME,
            )
            return
        f = eng.impl_ctx[c.fname]
        if len(c.args) != len(f.params):
            yield (
                Outcome.ERR,
                eng._err_state(state, state.pc, _errval_tag("ParamCount", c.fname)),
                EMPTY_FRAME,
            )
            return
        if self._inline_depth <= 0:
            self.stats.fuel_drops += 1
            return
        from .terms import NIL_T, UNDEF

        for vals, bad_expr, pc2 in eng.eval_args(store, state.pc, c.args):
            if vals is None:
                yield (
                    Outcome.ERR,
                    eng._err_state(state, pc2, _errval_expr(bad_expr)),
                    EMPTY_FRAME,
                )
                continue
            callee_store = dict(zip(f.params, vals))
            for z in f.locals():
                callee_store[z] = NIL_T
            callee = state.with_store(callee_store).with_pc(pc2)
            self._inline_depth -= 1
            try:
                leaves = list(self._exec(callee, f.body))
            finally:
                self._inline_depth += 1
            for o, st_q, af in leaves:
                if o is Outcome.OK:
                    for r, pc3 in eng._eval(st_q.store_dict(), st_q.pc, f.ret):
                        if r is UNDEF:
                            yield (
                                Outcome.ERR,
                                eng._err_state(
                                    st_q.with_store(store), pc3, _errval_expr(f.ret)
                                ),
                                af,
                            )
                        else:
                            yield (
                                Outcome.OK,
                                st_q.with_store(store).with_var(c.var, r).with_pc(pc3),
                                af,
                            )
                else:
                    err = st_q.store_get("err") or NIL_T
                    yield (o, st_q.with_store(store).with_var("err", err), af)

    def _exec_atomic(self, state: SymState, cmd: sx.Cmd, fixes_left: int):
        for o, st in self.engine._exec(state, cmd, self.engine.cfg.fuel):
            if o in (Outcome.OK, Outcome.ERR):
                yield o, st, EMPTY_FRAME
                continue
            got = self._fix(o, st)
            if got is None:
                self.stats.unfixable_cuts += 1
                continue
            if fixes_left <= 0:
                self.stats.fix_loop_cuts += 1
                self.stats.log("fix-loop-guard", repr(cmd))
                continue
            frame, constraints = got
            fixed = compose_sym(state, frame.as_state(PC(tuple(constraints))), self.engine.solver)
            if fixed is None:
                self.stats.unfixable_cuts += 1
                continue
            self.stats.fixes += 1
            self.stats.log("fix", repr(frame))
            for o2, st2, af2 in self._exec_atomic(fixed, cmd, fixes_left - 1):
                union = frame.union(af2)
                if union is None:
                    self.stats.frame_clash_cuts += 1
                    continue
                yield o2, st2, union

    def _fix(self, outcome: Outcome, state: SymState):
        return fix_for(outcome, state, self.engine.fresh, self.engine.predicates)


def exec_biab(
    state: SymState,
    cmd: sx.Cmd,
    spec_ctx=None,
    impl_ctx=None,
    cfg: Optional[EngineConfig] = None,
    predicates=None,
    solver=None,
) -> list[tuple[Outcome, SymState, AntiFrame]]:
    cfg = cfg or EngineConfig(mode=Mode.UX)
    if cfg.mode is not Mode.UX:
        raise ValueError("bi-abduction requires UX mode")
    eng = Engine(cfg, spec_ctx, impl_ctx, predicates, solver)
    return BiabEngine(eng, cfg.max_fixes_per_cmd).run(state, cmd)
