"""Symbolic states: store + heap + predicate multiset + path condition.

States are treated as immutable; update helpers return fresh states.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Union

from .concrete import CState
from .solver import SatResult, Solver, Interpretation, eval_under
from .terms import (
    FREED,
    TRUE,
    PC,
    BinOp,
    Lit,
    SymVar,
    Term,
    TypeTest,
    VNat,
    Value,
    eq,
    subst,
    sv,
    pretty,
)

SymCell = Union[Term, object]  # a Term or the FREED marker


@dataclass(frozen=True, slots=True)
class PredInstance:
    name: str
    ins: tuple[Term, ...]
    outs: tuple[Term, ...]

    def sym_vars(self) -> set[str]:
        out: set[str] = set()
        for t in self.ins + self.outs:
            out |= sv(t)
        return out

    def __repr__(self) -> str:
        ins = ", ".join(pretty(t) for t in self.ins)
        outs = ", ".join(pretty(t) for t in self.outs)
        return f"{self.name}({ins}; {outs})"


@dataclass(frozen=True, slots=True)
class SymHeap:
    cells: tuple[tuple[Term, SymCell], ...] = ()

    @staticmethod
    def of(mapping: dict[Term, SymCell]) -> SymHeap:
        return SymHeap(tuple(mapping.items()))

    def entries(self) -> tuple[tuple[Term, SymCell], ...]:
        return self.cells

    def addresses(self) -> tuple[Term, ...]:
        return tuple(a for a, _ in self.cells)

    def with_cell(self, addr: Term, content: SymCell) -> SymHeap:
        return SymHeap(self.cells + ((addr, content),))

    def without_index(self, i: int) -> SymHeap:
        return SymHeap(self.cells[:i] + self.cells[i + 1 :])

    def set_index(self, i: int, content: SymCell) -> SymHeap:
        addr = self.cells[i][0]
        return SymHeap(self.cells[:i] + ((addr, content),) + self.cells[i + 1 :])

    def sym_vars(self) -> set[str]:
        out: set[str] = set()
        for a, c in self.cells:
            out |= sv(a)
            if c is not FREED:
                out |= sv(c)
        return out

    def __len__(self) -> int:
        return len(self.cells)

    def __repr__(self) -> str:
        inner = ", ".join(
            f"{pretty(a)} -> {'freed' if c is FREED else pretty(c)}" for a, c in self.cells
        )
        return "{" + inner + "}"


@dataclass(frozen=True, slots=True)
class SymState:
    store: tuple[tuple[str, Term], ...] = ()
    heap: SymHeap = field(default_factory=SymHeap)
    preds: tuple[PredInstance, ...] = ()
    pc: PC = field(default_factory=PC)

    @staticmethod
    def make(store: dict[str, Term], heap=None, preds=(), pc=None) -> SymState:
        h = heap if isinstance(heap, SymHeap) else SymHeap.of(heap or {})
        return SymState(tuple(store.items()), h, tuple(preds), pc or PC())

    def store_dict(self) -> dict[str, Term]:
        return dict(self.store)

    def store_get(self, x: str) -> Optional[Term]:
        for k, v in self.store:
            if k == x:
                return v
        return None

    def with_var(self, x: str, t: Term) -> SymState:
        items = dict(self.store)
        items[x] = t
        return replace(self, store=tuple(items.items()))

    def with_store(self, store: dict[str, Term]) -> SymState:
        return replace(self, store=tuple(store.items()))

    def with_heap(self, heap: SymHeap) -> SymState:
        return replace(self, heap=heap)

    def with_preds(self, preds: tuple[PredInstance, ...]) -> SymState:
        return replace(self, preds=preds)

    def with_pc(self, pc: PC) -> SymState:
        return replace(self, pc=pc)

    def sym_vars(self) -> set[str]:
        out: set[str] = set()
        for _, t in self.store:
            out |= sv(t)
        out |= self.heap.sym_vars()
        for p in self.preds:
            out |= p.sym_vars()
        out |= self.pc.sym_vars()
        return out

    def rename(self, mapping: dict[str, str]) -> SymState:
        m = {SymVar(a): SymVar(b) for a, b in mapping.items()}
        return SymState(
            tuple((x, subst(t, m)) for x, t in self.store),
            SymHeap(
                tuple(
                    (subst(a, m), c if c is FREED else subst(c, m))
                    for a, c in self.heap.cells
                )
            ),
            tuple(
                PredInstance(
                    p.name,
                    tuple(subst(t, m) for t in p.ins),
                    tuple(subst(t, m) for t in p.outs),
                )
                for p in self.preds
            ),
            PC(tuple(subst(c, m) for c in self.pc.conjuncts)),
        )

    def __repr__(self) -> str:
        store = ", ".join(f"{x} -> {pretty(t)}" for x, t in self.store)
        preds = ", ".join(repr(p) for p in self.preds)
        return f"({{{store}}}, {self.heap!r}, {{{preds}}}, {self.pc!r})"


class FreshNames:
    """Monotone fresh-name source, prefix-tagged by origin for readable output."""

    def __init__(self, used: set[str] | None = None):
        self.used: set[str] = set(used or ())

    def fresh(self, base: str) -> str:
        if base not in self.used:
            self.used.add(base)
            return base
        k = 2
        while f"{base}{k}" in self.used:
            k += 1
        name = f"{base}{k}"
        self.used.add(name)
        return name

    def fresh_var(self, base: str) -> SymVar:
        return SymVar(self.fresh(base))


# ---------------------------------------------------------------------------
# Well-formedness (the full App.-style definition; the engine itself keeps a
# weaker invariant, covering state variables during model enumeration instead)


def heap_wf_constraints(heap: SymHeap) -> list[Term]:
    """Typing + pairwise address-disequality constraints for a symbolic heap."""
    out: list[Term] = []
    addrs = heap.addresses()
    for a, c in heap.cells:
        out.append(TypeTest(a, "Nat"))
        if c is not FREED:
            out.append(TypeTest(c, "Val"))
    for i in range(len(addrs)):
        for j in range(i + 1, len(addrs)):
            out.append(BinOp("!=", addrs[i], addrs[j]))
    return out


def wf_check(state: SymState, solver: Solver) -> Union[bool, SatResult]:
    """wf per the definition: sat(pc), pc covers all state variables, and pc
    entails store/heap typing and pairwise address disequality."""
    res = solver.check_sat(state.pc)
    if res is SatResult.UNSAT:
        return False
    unknown = res is SatResult.UNKNOWN
    if not state.sym_vars() <= state.pc.sym_vars():
        return False
    obligations: list[Term] = [TypeTest(t, "Val") for _, t in state.store]
    obligations += heap_wf_constraints(state.heap)
    for ob in obligations:
        ent = solver.entails(state.pc, ob)
        if ent is False:
            return False
        if ent is SatResult.UNKNOWN:
            unknown = True
    return SatResult.UNKNOWN if unknown else True


def wf_substitution(theta: dict[str, Term], pc: PC, solver: Solver) -> Union[bool, SatResult]:
    unknown = False
    for t in theta.values():
        ent = solver.entails(pc, TypeTest(t, "Val"))
        if ent is False:
            return False
        if ent is SatResult.UNKNOWN:
            unknown = True
    return SatResult.UNKNOWN if unknown else True


# ---------------------------------------------------------------------------
# Interpretation and composition


def interp_heap(heap: SymHeap, interp: Interpretation) -> Optional[dict[int, object]]:
    out: dict[int, object] = {}
    for a, c in heap.cells:
        av = eval_under(a, interp)
        if not isinstance(av, VNat) or av.n in out:
            return None
        if c is FREED:
            out[av.n] = FREED
        else:
            cv = eval_under(c, interp)
            if not isinstance(cv, Value):
                return None
            out[av.n] = cv
    return out


def interp_state(state: SymState, interp: Interpretation) -> Optional[CState]:
    """Interpret a predicate-free symbolic state; None if pc is false or any
    component faults."""
    if eval_under(state.pc.term(), interp) != TRUE:
        return None
    store: dict[str, Value] = {}
    for x, t in state.store:
        v = eval_under(t, interp)
        if not isinstance(v, Value):
            return None
        store[x] = v
    heap = interp_heap(state.heap, interp)
    if heap is None:
        return None
    return CState(store, heap)


def satisfies(
    interp: Interpretation,
    concrete: CState,
    state: SymState,
    predicates=None,
    depth: int = 4,
    domain=None,
) -> Union[bool, SatResult]:
    """interp, concrete |= state, splitting the concrete heap into the
    interpreted symbolic heap plus a part satisfying the predicate multiset."""
    from . import speclang

    if eval_under(state.pc.term(), interp) != TRUE:
        return False
    store: dict[str, Value] = {}
    for x, t in state.store:
        v = eval_under(t, interp)
        if not isinstance(v, Value):
            return False
        store[x] = v
    if store != concrete.store:
        return False
    own = interp_heap(state.heap, interp)
    if own is None:
        return False
    rest: dict[int, object] = {}
    for n, c in concrete.heap.items():
        if n in own:
            if own[n] != c:
                return False
        else:
            rest[n] = c
    if set(own) - set(concrete.heap):
        return False
    if not state.preds:
        return not rest
    # Build the star of predicate assertions over fresh logical names.
    theta: dict[str, Value] = {}
    parts: list = []
    for k, p in enumerate(state.preds):
        ins, outs = [], []
        for j, t in enumerate(p.ins):
            v = eval_under(t, interp)
            if not isinstance(v, Value):
                return False
            name = f"__in_{k}_{j}"
            theta[name] = v
            ins.append(speclang.lvar(name))
        for j, t in enumerate(p.outs):
            v = eval_under(t, interp)
            if not isinstance(v, Value):
                return False
            name = f"__out_{k}_{j}"
            theta[name] = v
            outs.append(speclang.lvar(name))
        parts.append(speclang.PredAssert(p.name, tuple(ins), tuple(outs)))
    star = speclang.Star(tuple(parts)) if len(parts) != 1 else parts[0]
    return speclang.assertion_sat(
        theta, CState({}, rest), star, predicates or {}, depth, domain=domain
    )


def compose_sym(a: SymState, b: SymState, solver: Solver) -> Optional[SymState]:
    """Compose resources: disjoint heap union, predicate union, conjoined pcs
    plus the well-formedness constraints of the combined resource.

    Stores must be identical or one empty; syntactically duplicate heap
    addresses make the composition undefined (None).
    """
    if a.store and b.store and a.store != b.store:
        return None
    store = a.store or b.store
    seen = set(a.heap.addresses())
    for addr in b.heap.addresses():
        if addr in seen:
            return None
    heap = SymHeap(a.heap.cells + b.heap.cells)
    preds = a.preds + b.preds
    pc = a.pc
    for c in b.pc.conjuncts:
        pc = solver.extend_pc(pc, c)
    pc = solver.extend_pc(pc, *heap_wf_constraints(heap))
    return SymState(store, heap, preds, pc)


def rest_heap(whole: SymHeap, part: SymHeap) -> Optional[SymHeap]:
    """Syntactic difference whole - part (by address term), None if missing."""
    cells = list(whole.cells)
    for a, c in part.cells:
        for i, (a2, c2) in enumerate(cells):
            if a2 == a and c2 == c:
                del cells[i]
                break
        else:
            return None
    return SymHeap(tuple(cells))
