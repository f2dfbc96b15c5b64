"""Matching plans: consumption order plus out-parameter learning recipes.

A plan entry pairs a simple assertion with `(variable, expression)` recipes,
where the expression may mention the placeholder O (value of the consumed
cell) or O1..On (outs of the consumed predicate instance).
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations
from typing import Iterable, Optional

from . import speclang as sl
from .terms import BinOp, Lit, LVar, Term, VNat, fold, lv as term_lv

# Placeholders for learned values; ordinary logical variables by construction.
O = LVar("O")


def O_i(i: int) -> LVar:
    return LVar(f"O{i}")


@dataclass(frozen=True, slots=True)
class PlanEntry:
    assertion: sl.Assertion
    outs: tuple[tuple[str, Term], ...]

    def __repr__(self) -> str:
        outs = ", ".join(f"({x}, {e!r})" for x, e in self.outs)
        return f"({sl.print_assertion(self.assertion)}, [{outs}])"


MatchingPlan = tuple[PlanEntry, ...]


class NotPlannable(Exception):
    pass


class PlanFailure(Exception):
    pass


def _invert(e: Term, target: Term, known: set[str], invert_mul: bool) -> Optional[tuple[str, Term]]:
    """Solve e == target for its single unknown variable, if the unknown sits
    under +/- (or * by a nonzero literal, behind the flag) with known siblings."""
    unknown = term_lv(e) - known
    if len(unknown) != 1:
        return None
    (x,) = unknown
    if _occurrences(e, x) != 1:
        return None
    t = e
    rhs = target
    while True:
        if isinstance(t, LVar) and t.name == x:
            return x, rhs
        if isinstance(t, BinOp) and t.op in ("+", "-", "*"):
            lk = term_lv(t.left) <= known
            rk = term_lv(t.right) <= known
            if t.op == "+":
                if lk:  # k + x' = r  =>  x' = r - k
                    t, rhs = t.right, BinOp("-", rhs, t.left)
                elif rk:
                    t, rhs = t.left, BinOp("-", rhs, t.right)
                else:
                    return None
            elif t.op == "-":
                if lk:  # k - x' = r  =>  x' = k - r
                    t, rhs = t.right, BinOp("-", t.left, rhs)
                elif rk:  # x' - k = r  =>  x' = r + k
                    t, rhs = t.left, BinOp("+", rhs, t.right)
                else:
                    return None
            else:
                if not invert_mul:
                    return None
                if rk and isinstance(t.right, Lit) and t.right.value != VNat(0):
                    t, rhs = t.left, BinOp("/", rhs, t.right)
                elif lk and isinstance(t.left, Lit) and t.left.value != VNat(0):
                    t, rhs = t.right, BinOp("/", rhs, t.left)
                else:
                    return None
        else:
            return None


def _occurrences(e: Term, x: str) -> int:
    if isinstance(e, LVar):
        return 1 if e.name == x else 0
    if isinstance(e, BinOp):
        return _occurrences(e.left, x) + _occurrences(e.right, x)
    from .terms import ListTerm, TypeTest, UnOp

    if isinstance(e, UnOp):
        return _occurrences(e.arg, x)
    if isinstance(e, TypeTest):
        return _occurrences(e.arg, x)
    if isinstance(e, ListTerm):
        return sum(_occurrences(i, x) for i in e.items)
    return 0


def ins_outs_learn(
    known: set[str], p: sl.Assertion, invert_mul: bool = False
) -> tuple[set[str], tuple[tuple[str, Term], ...]]:
    """The in-variables needed to consume `p` now, and the out recipes it
    yields; raises NotPlannable when `p` cannot be consumed from `known`."""
    if isinstance(p, sl.Cell):
        ins = term_lv(p.addr)
        if not ins <= known:
            raise NotPlannable(f"address of {p!r} not known")
        content_lv = term_lv(p.content)
        if content_lv <= known:
            return ins, ()
        got = _invert(p.content, O, known, invert_mul)
        if got is None:
            raise NotPlannable(f"cannot invert cell contents {p.content!r}")
        return ins, (got,)
    if isinstance(p, sl.CellFreed):
        ins = term_lv(p.addr)
        if not ins <= known:
            raise NotPlannable(f"address of {p!r} not known")
        return ins, ()
    if isinstance(p, sl.PredAssert):
        ins = set().union(set(), *(term_lv(t) for t in p.ins))
        if not ins <= known:
            raise NotPlannable(f"ins of {p!r} not known")
        outs: list[tuple[str, Term]] = []
        learned = set(known)
        for i, e in enumerate(p.outs, start=1):
            if term_lv(e) <= learned:
                continue
            got = _invert(e, O_i(i), learned, invert_mul)
            if got is None:
                raise NotPlannable(f"cannot invert out-parameter {e!r}")
            outs.append(got)
            learned.add(got[0])
        return ins, tuple(outs)
    if isinstance(p, sl.Pure):
        e = p.expr
        free = term_lv(e)
        if free <= known:
            return free, ()
        if isinstance(e, BinOp) and e.op == "=":
            # one side fully known, the other learnable by inversion
            for src, tgt in ((e.left, e.right), (e.right, e.left)):
                if term_lv(src) <= known:
                    got = _invert(tgt, src, known, invert_mul)
                    if got is not None:
                        return term_lv(src), (got,)
        raise NotPlannable(f"pure assertion {p!r} has unknowns {free - known}")
    if isinstance(p, sl.Emp):
        return set(), ()
    raise NotPlannable(f"not a simple assertion: {p!r}")


def plan(
    known: Iterable[str], p: sl.Assertion, invert_mul: bool = False
) -> MatchingPlan:
    """Compile a *-list into a matching plan, leftmost-plannable first."""
    items = sl.star_list(p)
    return _plan_list(set(known), items, invert_mul)


def _plan_list(
    known: set[str], items: list[sl.Assertion], invert_mul: bool
) -> MatchingPlan:
    remaining = list(items)
    out: list[PlanEntry] = []
    while remaining:
        for i, q in enumerate(remaining):
            try:
                _, outs = ins_outs_learn(known, q, invert_mul)
            except NotPlannable:
                continue
            out.append(PlanEntry(q, outs))
            known = known | {x for x, _ in outs}
            del remaining[i]
            break
        else:
            raise PlanFailure(
                "no plannable assertion among: "
                + ", ".join(sl.print_assertion(q) for q in remaining)
            )
    return tuple(out)


def plannable_by_some_order(
    known: Iterable[str], items: list[sl.Assertion], invert_mul: bool = False
) -> bool:
    """Brute-force permutation oracle for plan completeness (small lists only)."""
    for perm in permutations(items):
        k = set(known)
        ok = True
        for q in perm:
            try:
                _, outs = ins_outs_learn(k, q, invert_mul)
            except NotPlannable:
                ok = False
                break
            k |= {x for x, _ in outs}
        if ok:
            return True
    return False
