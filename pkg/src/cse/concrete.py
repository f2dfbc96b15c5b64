"""Concrete big-step interpreter over partial states with ok/err/miss outcomes.

This is the ground-truth oracle the symbolic engines are tested against.
Nondeterministic choice points (nondet, sym, allocation addresses) are
enumerated under an explicit budget so result sets stay finite.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Optional, Union

from . import syntax as sx
from .terms import (
    FALSE,
    FREED,
    NIL,
    TRUE,
    UNDEF,
    CellContent,
    PVar,
    Term,
    VBool,
    VList,
    VNat,
    VStr,
    Value,
    eval_term,
    pretty,
)

Store = dict[str, Value]
Heap = dict[int, CellContent]


class Outcome(enum.Enum):
    OK = "ok"
    ERR = "err"
    MISS = "miss"
    ABORT = "abort"  # symbolic engines only

    def __repr__(self) -> str:
        return self.value


@dataclass(frozen=True)
class CState:
    store: Store
    heap: Heap

    def with_var(self, x: str, v: Value) -> CState:
        s = dict(self.store)
        s[x] = v
        return CState(s, self.heap)

    def with_cell(self, n: int, v: CellContent) -> CState:
        h = dict(self.heap)
        h[n] = v
        return CState(self.store, h)

    def freeze(self):
        return (
            tuple(sorted(self.store.items(), key=lambda kv: kv[0])),
            tuple(sorted(self.heap.items(), key=lambda kv: kv[0])),
        )


def compose_state(a: CState, b: CState) -> Optional[CState]:
    """Store union + disjoint heap union; None when undefined."""
    for x, v in b.store.items():
        if x in a.store and a.store[x] != v:
            return None
    if set(a.heap) & set(b.heap):
        return None
    return CState({**a.store, **b.store}, {**a.heap, **b.heap})


def eval_expr(store: Store, e: Term) -> Union[Value, object]:
    """Evaluate a heap-free expression; UNDEF on absent vars or partiality."""
    return eval_term(e, lambda leaf: store.get(leaf.name) if isinstance(leaf, PVar) else None)


@dataclass
class Budget:
    """Bounds for the enumeration of nondeterministic choice points."""

    value_domain: tuple[Value, ...] = (VNat(0), VNat(1), VNat(2), NIL, TRUE, FALSE)
    nat_domain: tuple[int, ...] = (0, 1, 2)
    max_addr: int = 6
    enumerate_choices: bool = False  # single-run mode picks the canonical choice


@dataclass
class RunLimits:
    fuel: int = 8
    dropped_fuel: int = 0  # branches discarded by fuel exhaustion, counted


def _err(st: CState, verr: Value) -> CState:
    return st.with_var("err", verr)


def _stringify(e: Term) -> Value:
    return VStr(pretty(e))


def _expr_eval_err(e: Term) -> Value:
    return VList((VStr("ExprEval"), _stringify(e)))


def _type_err(e: Term, v: Value, ty: str) -> Value:
    return VList((VStr("Type"), _stringify(e), v, VStr(ty)))


Result = tuple[Outcome, CState]


def exec_concrete(
    st: CState,
    c: sx.Cmd,
    gamma: sx.ImplContext,
    fuel: int = 8,
    budget: Optional[Budget] = None,
) -> list[Result]:
    """All distinct results of executing `c` from `st` under the budget."""
    budget = budget or Budget()
    limits = RunLimits(fuel=fuel)
    seen: set[tuple] = set()
    results: list[Result] = []
    for r in _exec(st, c, gamma, limits.fuel, budget, limits):
        key = (r[0],) + r[1].freeze()
        if key not in seen:
            seen.add(key)
            results.append(r)
    return results


def _exec(
    st: CState, c: sx.Cmd, gamma: sx.ImplContext, fuel: int, budget: Budget, limits: RunLimits
) -> Iterable[Result]:
    s, h = st.store, st.heap

    if isinstance(c, sx.Skip):
        yield (Outcome.OK, st)
        return

    if isinstance(c, sx.Assign):
        v = eval_expr(s, c.expr)
        if v is UNDEF:
            yield (Outcome.ERR, _err(st, _expr_eval_err(c.expr)))
        else:
            yield (Outcome.OK, st.with_var(c.var, v))
        return

    if isinstance(c, sx.Nondet):
        choices: Iterable[int] = budget.nat_domain if budget.enumerate_choices else (0,)
        for n in choices:
            yield (Outcome.OK, st.with_var(c.var, VNat(n)))
        return

    if isinstance(c, sx.Sym):
        vals: Iterable[Value] = budget.value_domain if budget.enumerate_choices else (VNat(0),)
        for v in vals:
            yield (Outcome.OK, st.with_var(c.var, v))
        return

    if isinstance(c, sx.Error):
        v = eval_expr(s, c.expr)
        if v is UNDEF:
            yield (Outcome.ERR, _err(st, _expr_eval_err(c.expr)))
        else:
            yield (Outcome.ERR, _err(st, VList((VStr("Error"), v))))
        return

    if isinstance(c, sx.IfElse):
        v = eval_expr(s, c.cond)
        if v is UNDEF:
            yield (Outcome.ERR, _err(st, _expr_eval_err(c.cond)))
        elif not isinstance(v, VBool):
            yield (Outcome.ERR, _err(st, _type_err(c.cond, v, "Bool")))
        elif v.b:
            yield from _exec(st, c.then, gamma, fuel, budget, limits)
        else:
            yield from _exec(st, c.els, gamma, fuel, budget, limits)
        return

    if isinstance(c, sx.Seq):
        for o1, st1 in _exec(st, c.first, gamma, fuel, budget, limits):
            if o1 is Outcome.OK:
                yield from _exec(st1, c.second, gamma, fuel, budget, limits)
            else:
                yield (o1, st1)
        return

    if isinstance(c, sx.Lookup):
        v = eval_expr(s, c.addr)
        if v is UNDEF:
            yield (Outcome.ERR, _err(st, _expr_eval_err(c.addr)))
        elif not isinstance(v, VNat):
            yield (Outcome.ERR, _err(st, _type_err(c.addr, v, "Nat")))
        elif v.n not in h:
            yield (Outcome.MISS, _err(st, VList((VStr("MissingCell"), _stringify(c.addr), v))))
        elif h[v.n] is FREED:
            yield (Outcome.ERR, _err(st, VList((VStr("UseAfterFree"), _stringify(c.addr), v))))
        else:
            yield (Outcome.OK, st.with_var(c.var, h[v.n]))
        return

    if isinstance(c, sx.Mutate):
        v1 = eval_expr(s, c.addr)
        if v1 is UNDEF:
            yield (Outcome.ERR, _err(st, _expr_eval_err(c.addr)))
        elif not isinstance(v1, VNat):
            yield (Outcome.ERR, _err(st, _type_err(c.addr, v1, "Nat")))
        elif v1.n not in h:
            yield (Outcome.MISS, _err(st, VList((VStr("MissingCell"), _stringify(c.addr), v1))))
        elif h[v1.n] is FREED:
            yield (Outcome.ERR, _err(st, VList((VStr("UseAfterFree"), _stringify(c.addr), v1))))
        else:
            v2 = eval_expr(s, c.expr)
            if v2 is UNDEF:
                yield (Outcome.ERR, _err(st, _expr_eval_err(c.expr)))
            else:
                yield (Outcome.OK, st.with_cell(v1.n, v2))
        return

    if isinstance(c, sx.New):
        candidates = (
            range(budget.max_addr + 1) if budget.enumerate_choices else _least_fresh(h, c.size)
        )
        for base in candidates:
            if all(base + i not in h for i in range(c.size)):
                st2 = st
                for i in range(c.size):
                    st2 = st2.with_cell(base + i, NIL)
                yield (Outcome.OK, st2.with_var(c.var, VNat(base)))
        return

    if isinstance(c, sx.Free):
        v = eval_expr(s, c.addr)
        if v is UNDEF:
            yield (Outcome.ERR, _err(st, _expr_eval_err(c.addr)))
        elif not isinstance(v, VNat):
            yield (Outcome.ERR, _err(st, _type_err(c.addr, v, "Nat")))
        elif v.n not in h:
            yield (Outcome.MISS, _err(st, VList((VStr("MissingNegCell"), _stringify(c.addr), v))))
        elif h[v.n] is FREED:
            yield (Outcome.ERR, _err(st, VList((VStr("UseAfterFree"), _stringify(c.addr), v))))
        else:
            yield (Outcome.OK, st.with_cell(v.n, FREED))
        return

    if isinstance(c, sx.FCall):
        yield from _exec_call(st, c, gamma, fuel, budget, limits)
        return

    if isinstance(c, (sx.Fold, sx.Unfold)):
        yield (Outcome.OK, st)  # ghost commands
        return

    if isinstance(c, sx.Assume):
        v = eval_expr(s, c.expr)
        if v is UNDEF:
            yield (Outcome.ERR, _err(st, _expr_eval_err(c.expr)))
        elif v == TRUE:
            yield (Outcome.OK, st)
        # a false assume cuts the branch: no result
        return

    if isinstance(c, sx.Assert):
        v = eval_expr(s, c.expr)
        if v is UNDEF:
            yield (Outcome.ERR, _err(st, _expr_eval_err(c.expr)))
        elif v == TRUE:
            yield (Outcome.OK, st)
        elif isinstance(v, VBool):
            yield (Outcome.ERR, _err(st, VList((VStr("Assert"), _stringify(c.expr)))))
        # non-boolean: no applicable rule, the branch is stuck
        return

    raise TypeError(f"not a command: {c!r}")


def _least_fresh(h: Heap, size: int) -> tuple[int]:
    base = 0
    while any(base + i in h for i in range(max(size, 1))):
        base += 1
    return (base,)


def _exec_call(
    st: CState, c: sx.FCall, gamma: sx.ImplContext, fuel: int, budget: Budget, limits: RunLimits
) -> Iterable[Result]:
    s, h = st.store, st.heap
    if c.fname not in gamma:
        yield (Outcome.ERR, _err(st, VList((VStr("NoFunc"), VStr(c.fname)))))
        return
    f = gamma[c.fname]
    if len(f.params) != len(c.args):
        yield (Outcome.ERR, _err(st, VList((VStr("ParamCount"), VStr(c.fname)))))
        return
    vals: list[Value] = []
    for a in c.args:
        v = eval_expr(s, a)
        if v is UNDEF:
            yield (Outcome.ERR, _err(st, _expr_eval_err(a)))
            return
        vals.append(v)
    if fuel <= 0:
        limits.dropped_fuel += 1
        return
    callee_store: Store = dict(zip(f.params, vals))
    for z in f.locals():
        callee_store[z] = NIL
    for o, st_q in _exec(CState(callee_store, h), f.body, gamma, fuel - 1, budget, limits):
        if o is Outcome.OK:
            r = eval_expr(st_q.store, f.ret)
            if r is UNDEF:
                yield (
                    Outcome.ERR,
                    _err(CState(s, st_q.heap), _expr_eval_err(f.ret)),
                )
            else:
                yield (Outcome.OK, CState({**s, c.var: r}, st_q.heap))
        else:
            yield (o, CState({**s, "err": st_q.store["err"]}, st_q.heap))
