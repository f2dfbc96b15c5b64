"""The mode-parametric compositional symbolic engine.

Core rules follow the symbolic semantics one-to-one; function calls use
specifications when available (per mode) and fall back to fuel-bounded
inlining; fold/unfold go through consume/produce. Intermediate sat checks
over-approximate model existence when predicates are present; finalize_ux
corrects this for UX leaves by bounded unfolding at the end of a run.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Union

from . import consprod as cp
from . import speclang as sl
from . import syntax as sx
from .concrete import Outcome
from .consprod import Mode, Stats
from .solver import SatResult, Solver
from .symstate import FreshNames, PredInstance, SymState
from .terms import (
    FALSE_T,
    FREED,
    TRUE_T,
    NIL_T,
    UNDEF,
    BinOp,
    ListTerm,
    Lit,
    LVar,
    PC,
    PVar,
    SymVar,
    Term,
    TypeTest,
    UnOp,
    VNat,
    VStr,
    conj,
    disj,
    eq,
    fold,
    neg,
    pretty,
)


@dataclass
class EngineConfig:
    mode: Mode = Mode.EX
    fuel: int = 8
    unfold_depth: int = 2
    branch_limit: int = 10_000
    call_style: str = "prefer-spec"  # prefer-spec | inline-only | spec-only
    invert_mul: bool = False
    max_fixes_per_cmd: int = 32
    trace_sink: Optional[list] = None

    def __post_init__(self) -> None:
        if self.fuel < 0 or self.unfold_depth < 0 or self.branch_limit <= 0:
            raise ValueError("engine bounds must be positive")


@dataclass
class RunStats(Stats):
    fuel_drops: int = 0
    leaves: int = 0
    coverage_incomplete: bool = False


class BranchLimitExceeded(Exception):
    pass


class FoldabilityError(Exception):
    pass


def _str(e: Term) -> Term:
    return Lit(VStr(pretty(e)))


def _errval(tag: str, *rest: Term) -> Term:
    return fold(ListTerm((Lit(VStr(tag)),) + rest))


_EVAL_GUARDS: dict[str, Optional[tuple[Optional[str], Optional[str]]]] = {
    "+": ("Nat", "Nat"),
    "-": ("Nat", "Nat"),
    "*": ("Nat", "Nat"),
    "/": ("Nat", "Nat"),
    "<": ("Nat", "Nat"),
    "<=": ("Nat", "Nat"),
    ">": ("Nat", "Nat"),
    ">=": ("Nat", "Nat"),
    "and": ("Bool", "Bool"),
    "or": ("Bool", "Bool"),
    "=": None,
    "!=": None,
    "::": (None, "List"),
}


class Engine:
    def __init__(
        self,
        cfg: EngineConfig,
        spec_ctx: Optional[sl.SpecContext] = None,
        impl_ctx: Optional[sx.ImplContext] = None,
        predicates: Optional[sl.PredTable] = None,
        solver: Optional[Solver] = None,
        fresh: Optional[FreshNames] = None,
        stats: Optional[RunStats] = None,
    ):
        self.cfg = cfg
        self.spec_ctx = spec_ctx or {}
        self.impl_ctx = impl_ctx or {}
        self.predicates = predicates or {}
        self.solver = solver or Solver()
        self.fresh = fresh or FreshNames()
        self.stats = stats or RunStats(trace=cfg.trace_sink)

    # -- branch admission: cut on solver Unknown in UX, keep elsewhere

    def _admit(self, pc: PC) -> bool:
        res = self.solver.check_sat(pc)
        if res is SatResult.SAT:
            return True
        if res is SatResult.UNSAT:
            return False
        self.stats.unknowns += 1
        if self.cfg.mode.is_ux:
            self.stats.cuts += 1
            return False
        return True

    # -- symbolic expression evaluation (branching)

    def eval_expr(self, store: dict[str, Term], pc: PC, e: Term) -> list[tuple[object, PC]]:
        return list(self._eval(store, pc, e))

    def _eval(self, store, pc: PC, e: Term):
        if isinstance(e, Lit):
            yield e, pc
            return
        if isinstance(e, PVar):
            t = store.get(e.name)
            yield (UNDEF, pc) if t is None else (t, pc)
            return
        if isinstance(e, (SymVar, LVar)):
            raise ValueError(f"program expressions cannot contain {e!r}")
        if isinstance(e, ListTerm):
            yield from self._eval_list(store, pc, list(e.items), [])
            return
        if isinstance(e, TypeTest):
            for w, pc2 in self._eval(store, pc, e.arg):
                if w is UNDEF:
                    yield UNDEF, pc2
                else:
                    yield fold(TypeTest(w, e.ty, e.positive)), pc2
            return
        if isinstance(e, UnOp):
            guard_ty = "Bool" if e.op == "not" else "List"
            for w, pc2 in self._eval(store, pc, e.arg):
                if w is UNDEF:
                    yield UNDEF, pc2
                    continue
                yield from self._guarded(pc2, [TypeTest(w, guard_ty)], fold(UnOp(e.op, w)))
            return
        if isinstance(e, BinOp):
            guards_ty = _EVAL_GUARDS[e.op]
            for w1, pc1 in self._eval(store, pc, e.left):
                if w1 is UNDEF:
                    yield UNDEF, pc1
                    continue
                for w2, pc2 in self._eval(store, pc1, e.right):
                    if w2 is UNDEF:
                        yield UNDEF, pc2
                        continue
                    guards: list[Term] = []
                    if guards_ty is not None:
                        for w, ty in zip((w1, w2), guards_ty):
                            if ty is not None:
                                guards.append(TypeTest(w, ty))
                    if e.op == "-":
                        guards.append(BinOp("<=", w2, w1))
                    elif e.op == "/":
                        guards.append(BinOp("!=", w2, Lit(VNat(0))))
                    yield from self._guarded(pc2, guards, fold(BinOp(e.op, w1, w2)))
            return
        raise TypeError(f"not a term: {e!r}")

    def _eval_list(self, store, pc: PC, items: list[Term], acc: list[Term]):
        if not items:
            yield ListTerm(tuple(acc)), pc
            return
        for w, pc2 in self._eval(store, pc, items[0]):
            if w is UNDEF:
                yield UNDEF, pc2
            else:
                yield from self._eval_list(store, pc2, items[1:], acc + [w])

    def _guarded(self, pc: PC, guards: list[Term], result: Term):
        """One success branch under all well-definedness guards, plus one
        undef branch per guard, prefix-guarded so every branch condition is
        definite in the strict semantics (guards are definedness-ordered)."""
        guards = [g for g in (fold(g) for g in guards) if g != TRUE_T]
        pc_ok = self.solver.extend_pc(pc, *guards)
        if self._admit(pc_ok):
            yield result, pc_ok
        for i, g in enumerate(guards):
            pc_bad = self.solver.extend_pc(pc, *guards[:i], neg(g))
            if self._admit(pc_bad):
                yield UNDEF, pc_bad

    def eval_args(self, store, pc: PC, args: Iterable[Term]):
        """Left-to-right evaluation of an argument vector; the first undef
        short-circuits, remembering its source expression."""
        branches: list[tuple[Optional[list[Term]], Optional[Term], PC]] = [([], None, pc)]
        for a in args:
            nxt: list[tuple[Optional[list[Term]], Optional[Term], PC]] = []
            for vals, bad, pcb in branches:
                if vals is None:
                    nxt.append((None, bad, pcb))
                    continue
                for w, pc2 in self._eval(store, pcb, a):
                    if w is UNDEF:
                        nxt.append((None, a, pc2))
                    else:
                        nxt.append((vals + [w], None, pc2))
            branches = nxt
        return branches

    # -- entry points

    def run(self, state: SymState, cmd: sx.Cmd) -> list[tuple[Outcome, SymState]]:
        self.fresh.used |= state.sym_vars()
        out: list[tuple[Outcome, SymState]] = []
        for leaf in self._exec(state, cmd, self.cfg.fuel):
            out.append(leaf)
            self.stats.leaves += 1
            if self.stats.leaves > self.cfg.branch_limit:
                raise BranchLimitExceeded(f"more than {self.cfg.branch_limit} branches")
        return out

    def collect(self, state: SymState, cmd: sx.Cmd) -> list[tuple[Outcome, SymState]]:
        """All branches in deterministic order; hitting the branch limit flags
        stats.coverage_incomplete and returns the partial frontier."""
        self.fresh.used |= state.sym_vars()
        out: list[tuple[Outcome, SymState]] = []
        try:
            for leaf in self._exec(state, cmd, self.cfg.fuel):
                out.append(leaf)
                self.stats.leaves += 1
                if self.stats.leaves > self.cfg.branch_limit:
                    raise BranchLimitExceeded
        except BranchLimitExceeded:
            self.stats.coverage_incomplete = True
        return out

    def _err_state(self, state: SymState, pc: PC, verr: Term) -> SymState:
        return state.with_var("err", verr).with_pc(pc)

    # -- command execution

    def _exec(self, state: SymState, c: sx.Cmd, fuel: int):
        store = state.store_dict()
        pc = state.pc

        if isinstance(c, sx.Skip):
            yield (Outcome.OK, state)
            return

        if isinstance(c, sx.Assign):
            for w, pc2 in self._eval(store, pc, c.expr):
                if w is UNDEF:
                    yield (
                        Outcome.ERR,
                        self._err_state(state, pc2, _errval("ExprEval", _str(c.expr))),
                    )
                else:
                    yield (Outcome.OK, state.with_var(c.var, w).with_pc(pc2))
            return

        if isinstance(c, sx.Nondet):
            r = self.fresh.fresh_var("n")
            pc2 = self.solver.extend_pc(pc, TypeTest(r, "Nat"))
            yield (Outcome.OK, state.with_var(c.var, r).with_pc(pc2))
            return

        if isinstance(c, sx.Sym):
            r = self.fresh.fresh_var("s")
            pc2 = self.solver.extend_pc(pc, TypeTest(r, "Val"))
            yield (Outcome.OK, state.with_var(c.var, r).with_pc(pc2))
            return

        if isinstance(c, sx.Error):
            for w, pc2 in self._eval(store, pc, c.expr):
                verr = (
                    _errval("ExprEval", _str(c.expr)) if w is UNDEF else _errval("Error", w)
                )
                yield (Outcome.ERR, self._err_state(state, pc2, verr))
            return

        if isinstance(c, sx.Seq):
            for o1, st1 in self._exec(state, c.first, fuel):
                if o1 is Outcome.OK:
                    yield from self._exec(st1, c.second, fuel)
                else:
                    yield (o1, st1)
            return

        if isinstance(c, sx.IfElse):
            for w, pc2 in self._eval(store, pc, c.cond):
                if w is UNDEF:
                    yield (
                        Outcome.ERR,
                        self._err_state(state, pc2, _errval("ExprEval", _str(c.cond))),
                    )
                    continue
                pc_then = self.solver.extend_pc(pc2, w)
                if self._admit(pc_then):
                    yield from self._exec(state.with_pc(pc_then), c.then, fuel)
                pc_else = self.solver.extend_pc(pc2, neg(w))
                if self._admit(pc_else):
                    yield from self._exec(state.with_pc(pc_else), c.els, fuel)
                pc_ty = self.solver.extend_pc(pc2, TypeTest(w, "Bool", positive=False))
                if self._admit(pc_ty):
                    yield (
                        Outcome.ERR,
                        self._err_state(
                            state, pc_ty, _errval("Type", _str(c.cond), w, Lit(VStr("Bool")))
                        ),
                    )
            return

        if isinstance(c, sx.Lookup):
            yield from self._heap_access(state, c.addr, var=c.var)
            return
        if isinstance(c, sx.Mutate):
            yield from self._heap_access(state, c.addr, write=c.expr)
            return
        if isinstance(c, sx.Free):
            yield from self._heap_access(state, c.addr, free=True)
            return

        if isinstance(c, sx.New):
            loc = self.fresh.fresh_var("l")
            if c.size == 0:
                pc2 = self.solver.extend_pc(pc, TypeTest(loc, "Nat"))
                yield (Outcome.OK, state.with_var(c.var, loc).with_pc(pc2))
                return
            addrs: list[Term] = [loc] + [
                BinOp("+", loc, Lit(VNat(i))) for i in range(1, c.size)
            ]
            facts: list[Term] = [TypeTest(a, "Nat") for a in addrs]
            for a in addrs:
                for b in state.heap.addresses():
                    facts.append(neg(eq(a, b)))
            pc2 = self.solver.extend_pc(pc, *facts)
            if not self._admit(pc2):
                return
            heap = state.heap
            for a in addrs:
                heap = heap.with_cell(a, NIL_T)
            yield (Outcome.OK, state.with_var(c.var, loc).with_heap(heap).with_pc(pc2))
            return

        if isinstance(c, sx.FCall):
            yield from self._exec_call(state, c, fuel)
            return

        if isinstance(c, (sx.Fold, sx.Unfold)):
            if self.cfg.mode is Mode.EX:
                yield (Outcome.OK, state)  # ghost no-op in the core engine
            elif isinstance(c, sx.Fold):
                yield from self._exec_fold(state, c)
            else:
                yield from self._exec_unfold(state, c)
            return

        if isinstance(c, sx.Assume):
            for w, pc2 in self._eval(store, pc, c.expr):
                if w is UNDEF:
                    yield (
                        Outcome.ERR,
                        self._err_state(state, pc2, _errval("ExprEval", _str(c.expr))),
                    )
                    continue
                pc3 = self.solver.extend_pc(pc2, w)
                if self._admit(pc3):
                    yield (Outcome.OK, state.with_pc(pc3))
                # a false assume cuts the branch
            return

        if isinstance(c, sx.Assert):
            for w, pc2 in self._eval(store, pc, c.expr):
                if w is UNDEF:
                    yield (
                        Outcome.ERR,
                        self._err_state(state, pc2, _errval("ExprEval", _str(c.expr))),
                    )
                    continue
                pc_ok = self.solver.extend_pc(pc2, w)
                if self._admit(pc_ok):
                    yield (Outcome.OK, state.with_pc(pc_ok))
                pc_bad = self.solver.extend_pc(pc2, neg(w))
                if self._admit(pc_bad):
                    yield (
                        Outcome.ERR,
                        self._err_state(state, pc_bad, _errval("Assert", _str(c.expr))),
                    )
            return

        raise TypeError(f"not a command: {c!r}")

    def _heap_access(self, state: SymState, addr_expr: Term, var=None, write=None, free=False):
        """Shared lookup/mutate/free branching: matching cells, the type
        error, use-after-free, and the missing-resource case."""
        store = state.store_dict()
        negtag = "MissingNegCell" if free else "MissingCell"
        for w, pc2 in self._eval(store, state.pc, addr_expr):
            if w is UNDEF:
                yield (
                    Outcome.ERR,
                    self._err_state(state, pc2, _errval("ExprEval", _str(addr_expr))),
                )
                continue
            pc_ty = self.solver.extend_pc(pc2, TypeTest(w, "Nat", positive=False))
            if self._admit(pc_ty):
                yield (
                    Outcome.ERR,
                    self._err_state(
                        state, pc_ty, _errval("Type", _str(addr_expr), w, Lit(VStr("Nat")))
                    ),
                )
            for i, (a, content) in enumerate(state.heap.cells):
                pc_m = self.solver.extend_pc(pc2, eq(a, w))
                if not self._admit(pc_m):
                    continue
                if content is FREED:
                    pc_uaf = self.solver.extend_pc(pc_m, TypeTest(w, "Nat"))
                    yield (
                        Outcome.ERR,
                        self._err_state(
                            state, pc_uaf, _errval("UseAfterFree", _str(addr_expr), w)
                        ),
                    )
                    continue
                if var is not None:  # lookup
                    yield (Outcome.OK, state.with_var(var, content).with_pc(pc_m))
                elif free:
                    yield (
                        Outcome.OK,
                        state.with_heap(state.heap.set_index(i, FREED)).with_pc(pc_m),
                    )
                else:  # mutate: evaluate the right-hand side per matched cell
                    for w2, pc3 in self._eval(store, pc_m, write):
                        if w2 is UNDEF:
                            yield (
                                Outcome.ERR,
                                self._err_state(state, pc3, _errval("ExprEval", _str(write))),
                            )
                        else:
                            yield (
                                Outcome.OK,
                                state.with_heap(state.heap.set_index(i, w2)).with_pc(pc3),
                            )
            miss = conj(
                [TypeTest(w, "Nat")] + [neg(eq(w, a)) for a in state.heap.addresses()]
            )
            pc_miss = self.solver.extend_pc(pc2, miss)
            if self._admit(pc_miss):
                yield (
                    Outcome.MISS,
                    self._err_state(state, pc_miss, _errval(negtag, _str(addr_expr), w)),
                )

    # -- function calls

    def _exec_call(self, state: SymState, c: sx.FCall, fuel: int):
        specs = (
            sl.specs_for(self.spec_ctx, c.fname, self.cfg.mode.value)
            if self.cfg.mode is not Mode.EX and self.cfg.call_style != "inline-only"
            else []
        )
        if specs:
            for s in specs:
                yield from self._call_by_spec(state, c, s)
            return
        if (
            self.cfg.call_style == "spec-only"
            and self.cfg.mode is not Mode.EX
            and c.fname not in self.spec_ctx
        ):
            yield (
                Outcome.ERR,
                self._err_state(state, state.pc, _errval("NoFunc", Lit(VStr(c.fname)))),
            )
            return
        yield from self._call_by_inlining(state, c, fuel)

    def _call_by_spec(self, state: SymState, c: sx.FCall, s: sl.Spec):
        store = state.store_dict()
        if len(c.args) != len(s.params):
            yield (
                Outcome.ERR,
                self._err_state(state, state.pc, _errval("ParamCount", Lit(VStr(c.fname)))),
            )
            return
        for vals, bad_expr, pc2 in self.eval_args(store, state.pc, c.args):
            if vals is None:
                yield (
                    Outcome.ERR,
                    self._err_state(state, pc2, _errval("ExprEval", _str(bad_expr))),
                )
                continue
            theta = dict(zip(s.params, vals))
            st = state.with_pc(pc2)
            for res in cp.consume(
                self.solver, self.cfg.mode, s.pre, theta, st, self.stats, self.cfg.invert_mul
            ):
                if isinstance(res, cp.ConsumeAbort):
                    yield (Outcome.ABORT, self._err_state(state, pc2, res.payload))
                    continue
                for which, outcome, outvar in (
                    ("ok", Outcome.OK, c.var),
                    ("err", Outcome.ERR, "err"),
                ):
                    post = s.post(which)
                    if post is None:
                        continue
                    binders: tuple[str, ...] = ()
                    body = post
                    if isinstance(post, sl.Exists):
                        binders, body = post.names, post.body
                    theta2 = dict(res.theta)
                    for y in binders:
                        theta2[y] = self.fresh.fresh_var("z")
                    r_hat = self.fresh.fresh_var("r")
                    r_name = self.fresh.fresh("r")
                    pvar = "ret" if which == "ok" else "err"
                    body2 = sl.subst_assertion(body, {PVar(pvar): LVar(r_name)})
                    theta2[r_name] = r_hat
                    for st2 in cp.produce(self.solver, body2, theta2, res.frame, self.stats):
                        yield (outcome, st2.with_store(store).with_var(outvar, r_hat))

    def _call_by_inlining(self, state: SymState, c: sx.FCall, fuel: int):
        store = state.store_dict()
        if c.fname not in self.impl_ctx:
            yield (
                Outcome.ERR,
                self._err_state(state, state.pc, _errval("NoFunc", Lit(VStr(c.fname)))),
            )
            return
        f = self.impl_ctx[c.fname]
        if len(c.args) != len(f.params):
            yield (
                Outcome.ERR,
                self._err_state(state, state.pc, _errval("ParamCount", Lit(VStr(c.fname)))),
            )
            return
        for vals, bad_expr, pc2 in self.eval_args(store, state.pc, c.args):
            if vals is None:
                yield (
                    Outcome.ERR,
                    self._err_state(state, pc2, _errval("ExprEval", _str(bad_expr))),
                )
                continue
            if fuel <= 0:
                self.stats.fuel_drops += 1
                continue
            callee_store = dict(zip(f.params, vals))
            for z in f.locals():
                callee_store[z] = NIL_T
            callee = state.with_store(callee_store).with_pc(pc2)
            for o, st_q in self._exec(callee, f.body, fuel - 1):
                if o is Outcome.OK:
                    for r, pc3 in self._eval(st_q.store_dict(), st_q.pc, f.ret):
                        if r is UNDEF:
                            yield (
                                Outcome.ERR,
                                self._err_state(
                                    st_q.with_store(store), pc3, _errval("ExprEval", _str(f.ret))
                                ),
                            )
                        else:
                            yield (
                                Outcome.OK,
                                st_q.with_store(store).with_var(c.var, r).with_pc(pc3),
                            )
                else:
                    err = st_q.store_get("err") or NIL_T
                    yield (o, st_q.with_store(store).with_var("err", err))

    # -- fold / unfold

    def _fold_unfold_err(self, state: SymState, pc: Optional[PC] = None) -> SymState:
        st = state.with_var("err", Lit(VStr("fold/unfold")))
        return st.with_pc(pc) if pc is not None else st

    def _exec_fold(self, state: SymState, c: sx.Fold):
        d = self.predicates.get(c.pred)
        if d is None or len(c.args) != len(d.ins):
            yield (Outcome.ABORT, self._fold_unfold_err(state))
            return
        if self.cfg.mode.is_ux and not d.strictly_exact:
            raise FoldabilityError(f"UX folding of non-strictly-exact predicate {c.pred!r}")
        store = state.store_dict()
        for vals, bad_expr, pc2 in self.eval_args(store, state.pc, c.args):
            if vals is None:
                yield (Outcome.ABORT, self._fold_unfold_err(state, pc2))
                continue
            st = state.with_pc(pc2)
            any_success = False
            for binders, parts in d.disjuncts:
                theta = dict(zip(d.ins, vals))
                try:
                    results = cp.consume(
                        self.solver,
                        self.cfg.mode,
                        sl.star(parts),
                        theta,
                        st,
                        self.stats,
                        self.cfg.invert_mul,
                    )
                except cp.mp.PlanFailure:
                    continue
                for res in results:
                    if isinstance(res, cp.ConsumeAbort):
                        continue
                    try:
                        outs = tuple(res.theta[o] for o in d.outs)
                    except KeyError:
                        continue
                    inst = PredInstance(c.pred, tuple(vals), outs)
                    any_success = True
                    yield (Outcome.OK, res.frame.with_preds(res.frame.preds + (inst,)))
            if not any_success:
                yield (Outcome.ABORT, self._fold_unfold_err(state, pc2))

    def _exec_unfold(self, state: SymState, c: sx.Unfold):
        d = self.predicates.get(c.pred)
        if d is None or len(c.args) != len(d.ins):
            yield (Outcome.ABORT, self._fold_unfold_err(state))
            return
        store = state.store_dict()
        for vals, bad_expr, pc2 in self.eval_args(store, state.pc, c.args):
            if vals is None:
                yield (Outcome.ABORT, self._fold_unfold_err(state, pc2))
                continue
            st = state.with_pc(pc2)
            for outs_vals, st2 in cp.cons_pred(
                self.solver, self.cfg.mode, c.pred, tuple(vals), st, self.stats
            ):
                if outs_vals is cp._ABORT:
                    yield (Outcome.ABORT, self._fold_unfold_err(st2, st2.pc))
                    continue
                for binders, parts in d.disjuncts:
                    theta = dict(zip(d.ins, vals))
                    theta.update(zip(d.outs, outs_vals))
                    for y in binders:
                        theta[y] = self.fresh.fresh_var("z")
                    for st3 in cp.produce(self.solver, sl.star(parts), theta, st2, self.stats):
                        yield (Outcome.OK, st3)

    # -- UX end-of-run validation

    def finalize_ux(self, leaf: tuple[Outcome, SymState]) -> bool:
        """Keep a UX leaf only if bounded unfolding of its predicate instances
        leaves a satisfiable state (the leaf is then model-bearing at the
        checked bound). Each instance may be unfolded transitively up to
        cfg.unfold_depth times."""
        _, state = leaf
        return self._witnessable(state, (self.cfg.unfold_depth,) * len(state.preds))

    def _witnessable(self, state: SymState, budgets: tuple[int, ...]) -> bool:
        if not state.preds:
            return self.solver.check_sat(state.pc) is SatResult.SAT
        p, budget = state.preds[0], budgets[0]
        if budget <= 0:
            return False
        d = self.predicates.get(p.name)
        if d is None or len(d.ins) != len(p.ins) or len(d.outs) != len(p.outs):
            return False
        base = state.with_preds(state.preds[1:])
        quiet = Stats()
        for binders, parts in d.disjuncts:
            theta = dict(zip(d.ins, p.ins))
            theta.update(zip(d.outs, p.outs))
            for y in binders:
                theta[y] = self.fresh.fresh_var("uf")
            for st2 in cp.produce(self.solver, sl.star(parts), theta, base, quiet):
                grown = len(st2.preds) - (len(state.preds) - 1)
                new_budgets = budgets[1:] + (budget - 1,) * grown
                if self._witnessable(st2, new_budgets):
                    return True
        return False


def exec_sym(
    state: SymState,
    cmd: sx.Cmd,
    spec_ctx: Optional[sl.SpecContext] = None,
    impl_ctx: Optional[sx.ImplContext] = None,
    cfg: Optional[EngineConfig] = None,
    predicates: Optional[sl.PredTable] = None,
    solver: Optional[Solver] = None,
) -> list[tuple[Outcome, SymState]]:
    eng = Engine(cfg or EngineConfig(), spec_ctx, impl_ctx, predicates, solver)
    return eng.run(state, cmd)


def collect(
    state: SymState,
    cmd: sx.Cmd,
    spec_ctx: Optional[sl.SpecContext] = None,
    impl_ctx: Optional[sx.ImplContext] = None,
    cfg: Optional[EngineConfig] = None,
    predicates: Optional[sl.PredTable] = None,
    solver: Optional[Solver] = None,
) -> tuple[list[tuple[Outcome, SymState]], RunStats]:
    eng = Engine(cfg or EngineConfig(), spec_ctx, impl_ctx, predicates, solver)
    out = eng.collect(state, cmd)
    return out, eng.stats
