"""Assertions, predicates, function specifications, and their concrete
satisfaction oracle; plus toAsrt and spec internalisation."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Optional, Union

from .concrete import CState
from .solver import SatResult
from .terms import (
    FREED,
    NIL_T,
    TRUE,
    TRUE_T,
    BinOp,
    Lit,
    ListTerm,
    LVar,
    PVar,
    SymVar,
    Term,
    TypeTest,
    UnOp,
    VList,
    VNat,
    VStr,
    Value,
    eval_term,
    fold,
    lv as term_lv,
    pv as term_pv,
    pretty,
    subst,
)


def lvar(name: str) -> LVar:
    return LVar(name)


class Assertion:
    __slots__ = ()

    def __repr__(self) -> str:
        return print_assertion(self)


@dataclass(frozen=True, slots=True, repr=False)
class Pure(Assertion):
    expr: Term


@dataclass(frozen=True, slots=True, repr=False)
class AFalse(Assertion):
    pass


@dataclass(frozen=True, slots=True, repr=False)
class Implies(Assertion):
    left: Assertion
    right: Assertion


@dataclass(frozen=True, slots=True, repr=False)
class AOr(Assertion):
    left: Assertion
    right: Assertion


@dataclass(frozen=True, slots=True, repr=False)
class Exists(Assertion):
    names: tuple[str, ...]
    body: Assertion


@dataclass(frozen=True, slots=True, repr=False)
class Emp(Assertion):
    pass


@dataclass(frozen=True, slots=True, repr=False)
class Cell(Assertion):
    addr: Term
    content: Term


@dataclass(frozen=True, slots=True, repr=False)
class CellFreed(Assertion):
    addr: Term


@dataclass(frozen=True, slots=True, repr=False)
class Star(Assertion):
    parts: tuple[Assertion, ...]


@dataclass(frozen=True, slots=True, repr=False)
class PredAssert(Assertion):
    name: str
    ins: tuple[Term, ...]
    outs: tuple[Term, ...]


def star(parts: Iterable[Assertion]) -> Assertion:
    flat: list[Assertion] = []
    for p in parts:
        if isinstance(p, Star):
            flat.extend(p.parts)
        elif not isinstance(p, Emp):
            flat.append(p)
    if not flat:
        return Emp()
    if len(flat) == 1:
        return flat[0]
    return Star(tuple(flat))


def star_list(p: Assertion) -> list[Assertion]:
    """Flatten a *-list; raises on connectives consume cannot handle."""
    if isinstance(p, Star):
        out: list[Assertion] = []
        for q in p.parts:
            out.extend(star_list(q))
        return out
    if isinstance(p, (Implies, AOr, Exists, AFalse)):
        raise UnsupportedAssertion(f"not a *-list of simple assertions: {p!r}")
    if isinstance(p, Emp):
        return []
    return [p]


class UnsupportedAssertion(Exception):
    pass


def lv(p: Assertion) -> set[str]:
    if isinstance(p, Pure):
        return term_lv(p.expr)
    if isinstance(p, (AFalse, Emp)):
        return set()
    if isinstance(p, (Implies, AOr)):
        return lv(p.left) | lv(p.right)
    if isinstance(p, Exists):
        return lv(p.body) - set(p.names)
    if isinstance(p, Cell):
        return term_lv(p.addr) | term_lv(p.content)
    if isinstance(p, CellFreed):
        return term_lv(p.addr)
    if isinstance(p, Star):
        return set().union(*(lv(q) for q in p.parts))
    if isinstance(p, PredAssert):
        return set().union(set(), *(term_lv(t) for t in p.ins + p.outs))
    raise TypeError(f"not an assertion: {p!r}")


def pv(p: Assertion) -> set[str]:
    if isinstance(p, Pure):
        return term_pv(p.expr)
    if isinstance(p, (AFalse, Emp)):
        return set()
    if isinstance(p, (Implies, AOr)):
        return pv(p.left) | pv(p.right)
    if isinstance(p, Exists):
        return pv(p.body)
    if isinstance(p, Cell):
        return term_pv(p.addr) | term_pv(p.content)
    if isinstance(p, CellFreed):
        return term_pv(p.addr)
    if isinstance(p, Star):
        return set().union(*(pv(q) for q in p.parts))
    if isinstance(p, PredAssert):
        return set().union(set(), *(term_pv(t) for t in p.ins + p.outs))
    raise TypeError(f"not an assertion: {p!r}")


def subst_assertion(p: Assertion, mapping: dict[Term, Term]) -> Assertion:
    if isinstance(p, Pure):
        return Pure(fold(subst(p.expr, mapping)))
    if isinstance(p, (AFalse, Emp)):
        return p
    if isinstance(p, Implies):
        return Implies(subst_assertion(p.left, mapping), subst_assertion(p.right, mapping))
    if isinstance(p, AOr):
        return AOr(subst_assertion(p.left, mapping), subst_assertion(p.right, mapping))
    if isinstance(p, Exists):
        inner = {k: v for k, v in mapping.items() if not (isinstance(k, LVar) and k.name in p.names)}
        return Exists(p.names, subst_assertion(p.body, inner))
    if isinstance(p, Cell):
        return Cell(fold(subst(p.addr, mapping)), fold(subst(p.content, mapping)))
    if isinstance(p, CellFreed):
        return CellFreed(fold(subst(p.addr, mapping)))
    if isinstance(p, Star):
        return Star(tuple(subst_assertion(q, mapping) for q in p.parts))
    if isinstance(p, PredAssert):
        return PredAssert(
            p.name,
            tuple(fold(subst(t, mapping)) for t in p.ins),
            tuple(fold(subst(t, mapping)) for t in p.outs),
        )
    raise TypeError(f"not an assertion: {p!r}")


# ---------------------------------------------------------------------------
# Predicates and specifications


@dataclass(frozen=True, slots=True)
class Predicate:
    name: str
    ins: tuple[str, ...]
    outs: tuple[str, ...]
    # each disjunct: (existential binders, *-list of simple assertions)
    disjuncts: tuple[tuple[tuple[str, ...], tuple[Assertion, ...]], ...]
    strictly_exact: bool = False

    def __post_init__(self) -> None:
        if set(self.ins) & set(self.outs):
            raise ValueError(f"ins and outs of {self.name} overlap")
        allowed = set(self.ins) | set(self.outs)
        for binders, parts in self.disjuncts:
            free = set().union(set(), *(lv(q) for q in parts)) - set(binders)
            if not free <= allowed:
                raise ValueError(f"free variables {free - allowed} in body of {self.name}")


PredTable = dict[str, Predicate]


@dataclass(frozen=True, slots=True)
class Spec:
    """External function specification: [x⃗ = x⃗ * pre] f(x⃗) [ok: ...][err: ...].

    Parameter logical variables carry the parameter names; omitted posts mean
    an unsatisfiable post-condition.
    """

    mode: str  # "ox" | "ux"
    fname: str
    params: tuple[str, ...]
    pre: Assertion
    ok_post: Optional[Assertion] = None  # may be Exists(...)
    err_post: Optional[Assertion] = None
    name: str = ""  # optional label from the source file

    def __post_init__(self) -> None:
        if self.mode not in ("ox", "ux"):
            raise ValueError(f"bad mode {self.mode}")
        if pv(self.pre):
            raise ValueError("pre-condition must not mention program variables")
        if isinstance(self.pre, Exists):
            raise ValueError("pre-condition must be existential-free")
        for which, post in (("ret", self.ok_post), ("err", self.err_post)):
            if post is None:
                continue
            body = post.body if isinstance(post, Exists) else post
            if pv(body) - {which}:
                raise ValueError(f"{which}-post may only mention program variable {which}")

    def full_pre(self) -> Assertion:
        eqs = [Pure(BinOp("=", PVar(x), LVar(x))) for x in self.params]
        return star(eqs + [self.pre])

    def post(self, which: str) -> Optional[Assertion]:
        return self.ok_post if which == "ok" else self.err_post


SpecContext = dict[str, list[Spec]]


def specs_for(ctx: SpecContext, fname: str, mode: str) -> list[Spec]:
    return [s for s in ctx.get(fname, []) if s.mode == mode]


# ---------------------------------------------------------------------------
# Concrete satisfaction oracle


class _Depth(Exception):
    pass


def default_domain(
    theta: dict[str, Value], state: CState, p: Assertion, extra: Iterable[Value] = ()
) -> list[Value]:
    """Candidate values for existentials: state and theta values with their
    list components, literals of the assertion, and a small base set."""
    seen: list[Value] = []

    def add(v: Value) -> None:
        if v not in seen:
            seen.append(v)
        if isinstance(v, VList):
            for i in range(1, len(v.items) + 1):
                tail = VList(v.items[i:])
                if tail not in seen:
                    seen.append(tail)
            for item in v.items:
                add(item)

    from .terms import NIL, TRUE as VTRUE, FALSE as VFALSE

    for v in theta.values():
        add(v)
    for n, c in state.heap.items():
        add(VNat(n))
        if c is not FREED:
            add(c)
    for v in state.store.values():
        add(v)
    for t in _assertion_literals(p):
        add(t)
    for v in extra:
        add(v)
    for v in (VNat(0), VNat(1), VNat(2), NIL, VTRUE, VFALSE, VList(())):
        add(v)
    return seen


def _assertion_literals(p: Assertion) -> list[Value]:
    out: list[Value] = []

    def visit_term(t: Term) -> None:
        if isinstance(t, Lit):
            out.append(t.value)
        elif isinstance(t, ListTerm):
            for i in t.items:
                visit_term(i)
        elif isinstance(t, TypeTest):
            visit_term(t.arg)
        elif isinstance(t, UnOp):
            visit_term(t.arg)
        elif isinstance(t, BinOp):
            visit_term(t.left)
            visit_term(t.right)

    def visit(q: Assertion) -> None:
        if isinstance(q, Pure):
            visit_term(q.expr)
        elif isinstance(q, (Implies, AOr)):
            visit(q.left)
            visit(q.right)
        elif isinstance(q, Exists):
            visit(q.body)
        elif isinstance(q, Cell):
            visit_term(q.addr)
            visit_term(q.content)
        elif isinstance(q, CellFreed):
            visit_term(q.addr)
        elif isinstance(q, Star):
            for part in q.parts:
                visit(part)
        elif isinstance(q, PredAssert):
            for t in q.ins + q.outs:
                visit_term(t)

    visit(p)
    return out


def _eval_lexp(e: Term, theta: dict[str, Value], store: dict[str, Value]):
    def look(leaf: Term):
        if isinstance(leaf, LVar):
            return theta.get(leaf.name)
        if isinstance(leaf, PVar):
            return store.get(leaf.name)
        return None

    return eval_term(e, look)


def assertion_sat(
    theta: dict[str, Value],
    state: CState,
    p: Assertion,
    preds: PredTable,
    depth: int = 4,
    domain: Optional[list[Value]] = None,
) -> Union[bool, SatResult]:
    """theta, state |= p, with predicate unfolding bounded by `depth`.

    Returns SatResult.UNKNOWN when the bound is hit before the question is
    settled.
    """
    if domain is None:
        domain = default_domain(theta, state, p)
    try:
        return _sat(theta, state.store, dict(state.heap), p, preds, depth, domain)
    except _Depth:
        return SatResult.UNKNOWN


def _sat(theta, store, heap, p, preds, depth, domain) -> bool:
    if isinstance(p, Pure):
        return heap == {} and _eval_lexp(p.expr, theta, store) == TRUE
    if isinstance(p, AFalse):
        return False
    if isinstance(p, Emp):
        return heap == {}
    if isinstance(p, Implies):
        left = _sat(theta, store, heap, p.left, preds, depth, domain)
        if not left:
            return True
        return _sat(theta, store, heap, p.right, preds, depth, domain)
    if isinstance(p, AOr):
        pending = False
        for q in (p.left, p.right):
            try:
                if _sat(theta, store, heap, q, preds, depth, domain):
                    return True
            except _Depth:
                pending = True
        if pending:
            raise _Depth
        return False
    if isinstance(p, Exists):
        pending = False
        for combo in itertools.product(domain, repeat=len(p.names)):
            t2 = dict(theta)
            t2.update(zip(p.names, combo))
            try:
                if _sat(t2, store, heap, p.body, preds, depth, domain):
                    return True
            except _Depth:
                pending = True
        if pending:
            raise _Depth
        return False
    if isinstance(p, Cell):
        a = _eval_lexp(p.addr, theta, store)
        v = _eval_lexp(p.content, theta, store)
        return (
            isinstance(a, VNat)
            and isinstance(v, Value)
            and heap == {a.n: v}
        )
    if isinstance(p, CellFreed):
        a = _eval_lexp(p.addr, theta, store)
        return isinstance(a, VNat) and len(heap) == 1 and heap.get(a.n) is FREED
    if isinstance(p, Star):
        return _sat_star(theta, store, heap, list(p.parts), preds, depth, domain)
    if isinstance(p, PredAssert):
        if p.name not in preds:
            return False
        d = preds[p.name]
        if len(p.ins) != len(d.ins) or len(p.outs) != len(d.outs):
            return False
        t2 = {}
        for name, e in zip(d.ins + d.outs, p.ins + p.outs):
            v = _eval_lexp(e, theta, store)
            if not isinstance(v, Value):
                return False
            t2[name] = v
        if depth <= 0:
            raise _Depth
        pending = False
        for binders, parts in d.disjuncts:
            try:
                got = _sat(
                    t2,
                    store,
                    heap,
                    Exists(binders, star(parts)) if binders else star(parts),
                    preds,
                    depth - 1,
                    domain,
                )
                if got:
                    return True
            except _Depth:
                pending = True
        if pending:
            raise _Depth
        return False
    raise TypeError(f"not an assertion: {p!r}")


def _sat_star(theta, store, heap, parts, preds, depth, domain) -> bool:
    if not parts:
        return heap == {}
    head, rest = parts[0], parts[1:]
    # Deterministic footprints avoid subset enumeration where possible.
    if isinstance(head, (Pure, Emp)) or (isinstance(head, AFalse)):
        if not _sat(theta, store, {}, head, preds, depth, domain):
            return False
        return _sat_star(theta, store, heap, rest, preds, depth, domain)
    if isinstance(head, Cell) or isinstance(head, CellFreed):
        a = _eval_lexp(head.addr, theta, store)
        if not isinstance(a, VNat) or a.n not in heap:
            return False
        if not _sat(theta, store, {a.n: heap[a.n]}, head, preds, depth, domain):
            return False
        remaining = {n: c for n, c in heap.items() if n != a.n}
        return _sat_star(theta, store, remaining, rest, preds, depth, domain)
    # General case: enumerate sub-heaps for the head.
    items = sorted(heap.items(), key=lambda kv: kv[0])
    pending = False
    for r in range(len(items) + 1):
        for chosen in itertools.combinations(items, r):
            h1 = dict(chosen)
            h2 = {n: c for n, c in items if n not in h1}
            try:
                if _sat(theta, store, h1, head, preds, depth, domain) and _sat_star(
                    theta, store, h2, rest, preds, depth, domain
                ):
                    return True
            except _Depth:
                pending = True
    if pending:
        raise _Depth
    return False


def assertion_heaps(
    theta: dict[str, Value],
    p: Assertion,
    preds: PredTable,
    domain: list[Value],
    depth: int = 4,
    store: Optional[dict[str, Value]] = None,
) -> Iterable[dict[int, object]]:
    """Structurally generate the heaps satisfying `p` under theta (bounded
    existential enumeration and predicate unfolding). `store` resolves the
    ret/err program variables of post-conditions."""
    store = store or {}
    if isinstance(p, Pure):
        if _eval_lexp(p.expr, theta, store) == TRUE:
            yield {}
        return
    if isinstance(p, Emp):
        yield {}
        return
    if isinstance(p, AFalse):
        return
    if isinstance(p, AOr):
        yield from assertion_heaps(theta, p.left, preds, domain, depth, store)
        yield from assertion_heaps(theta, p.right, preds, domain, depth, store)
        return
    if isinstance(p, Exists):
        parts = p.body.parts if isinstance(p.body, Star) else (p.body,)
        yield from _exists_heaps(theta, list(p.names), list(parts), preds, domain, depth, store)
        return
    if isinstance(p, Cell):
        a = _eval_lexp(p.addr, theta, store)
        v = _eval_lexp(p.content, theta, store)
        if isinstance(a, VNat) and isinstance(v, Value):
            yield {a.n: v}
        return
    if isinstance(p, CellFreed):
        a = _eval_lexp(p.addr, theta, store)
        if isinstance(a, VNat):
            yield {a.n: FREED}
        return
    if isinstance(p, Star):
        def go(parts, acc):
            if not parts:
                yield dict(acc)
                return
            for h in assertion_heaps(theta, parts[0], preds, domain, depth, store):
                if set(h) & set(acc):
                    continue
                yield from go(parts[1:], {**acc, **h})

        yield from go(list(p.parts), {})
        return
    if isinstance(p, PredAssert):
        if depth <= 0 or p.name not in preds:
            return
        d = preds[p.name]
        t2 = {}
        for name, e in zip(d.ins + d.outs, p.ins + p.outs):
            v = _eval_lexp(e, theta, store)
            if not isinstance(v, Value):
                return
            t2[name] = v
        for binders, parts in d.disjuncts:
            body = Exists(binders, star(parts)) if binders else star(parts)
            yield from assertion_heaps(t2, body, preds, domain, depth - 1)
        return
    raise TypeError(f"no heap generation for {p!r}")


def _exists_heaps(theta, binders, parts, preds, domain, depth, store=None):
    """Enumerate existential binders one at a time, filtering pure parts as
    soon as they become ground; keeps inductive-predicate enumeration from
    exploding."""
    store = store or {}
    known = set(theta)
    remaining: list[Assertion] = []
    for q in parts:
        if isinstance(q, Pure) and lv(q) <= known:
            if _eval_lexp(q.expr, theta, store) != TRUE:
                return
        else:
            remaining.append(q)
    if not binders:
        body = star(remaining)
        yield from assertion_heaps(theta, body, preds, domain, depth, store)
        return
    # Prefer the binder that grounds some pure part fastest.
    def grounds(y: str) -> int:
        return sum(
            1
            for q in remaining
            if isinstance(q, Pure) and lv(q) - known == {y}
        )

    binders = sorted(binders, key=lambda y: -grounds(y))
    y, rest = binders[0], binders[1:]
    for v in domain:
        t2 = dict(theta)
        t2[y] = v
        yield from _exists_heaps(t2, rest, remaining, preds, domain, depth, store)


def strictly_exact_at_bound(
    pred: Predicate,
    preds: PredTable,
    domain: list[Value],
    depth: int = 4,
    **_ignored,
) -> bool:
    """At most one heap satisfies the body per argument tuple, at the bound."""
    names = pred.ins + pred.outs
    for combo in itertools.product(domain, repeat=len(names)):
        theta = dict(zip(names, combo))
        found: Optional[tuple] = None
        for binders, parts in pred.disjuncts:
            q = Exists(binders, star(parts)) if binders else star(parts)
            for heap in assertion_heaps(theta, q, preds, domain, depth):
                key = tuple(sorted(heap.items(), key=lambda kv: kv[0]))
                if found is not None and found != key:
                    return False
                found = key
    return True


# ---------------------------------------------------------------------------
# toAsrt


def lift_sym(t: Term) -> Term:
    """Identity substitution: each symbolic variable becomes the logical
    variable of the same name."""
    mapping = {}
    for name in sorted(_sym_names(t)):
        mapping[SymVar(name)] = LVar(name)
    return subst(t, mapping)


def _sym_names(t: Term) -> set[str]:
    from .terms import sv

    return sv(t)


def to_assertion(state) -> Assertion:
    """Turn a symbolic state into the corresponding assertion: store becomes
    equalities, heap cells become cell assertions, predicates are lifted, the
    pc becomes pure conjuncts (minus tautological typing facts)."""
    parts: list[Assertion] = []
    for x, t in state.store:
        parts.append(Pure(BinOp("=", PVar(x), lift_sym(t))))
    cell_addrs: list[Term] = []
    for a, c in state.heap.cells:
        la = lift_sym(a)
        cell_addrs.append(la)
        if c is FREED:
            parts.append(CellFreed(la))
        else:
            parts.append(Cell(la, lift_sym(c)))
    for p in state.preds:
        parts.append(
            PredAssert(
                p.name,
                tuple(lift_sym(t) for t in p.ins),
                tuple(lift_sym(t) for t in p.outs),
            )
        )
    for c in state.pc.conjuncts:
        lc = lift_sym(c)
        if _tautological_typing(lc, cell_addrs):
            continue
        parts.append(Pure(lc))
    if not parts:
        return Pure(TRUE_T)
    return star(parts)


def _tautological_typing(t: Term, cell_addrs: list[Term]) -> bool:
    if isinstance(t, TypeTest) and t.positive:
        if t.ty == "Val" and isinstance(t.arg, (LVar, Lit)):
            return True
        if t.ty == "Nat" and t.arg in cell_addrs:
            return True
    return False


# ---------------------------------------------------------------------------
# Internalisation


@dataclass(frozen=True, slots=True)
class InternalisedSpec:
    """Internal pre plus the implication obligations linking internal and
    external post-conditions (direction depends on the mode)."""

    spec: Spec
    internal_pre: Assertion
    locals: tuple[str, ...]
    ret_expr: Term


def internal_of_external(spec: Spec, f) -> InternalisedSpec:
    if spec.fname != f.name:
        raise ValueError(f"spec for {spec.fname} applied to {f.name}")
    if len(spec.params) != len(f.params) or spec.params != tuple(f.params):
        raise ValueError(f"parameter mismatch for {f.name}")
    zs = f.locals()
    parts = [Pure(BinOp("=", PVar(x), LVar(x))) for x in spec.params]
    parts.append(spec.pre)
    parts.extend(Pure(BinOp("=", PVar(z), NIL_T)) for z in zs)
    return InternalisedSpec(spec, star(parts), zs, f.ret)


def internalisation_obligation(
    ispec: InternalisedSpec, which: str, internal_post: Assertion
) -> tuple[Assertion, Assertion]:
    """Return (antecedent, consequent): the implication that must be valid for
    `internal_post` to internalise the external `which`-post of the spec.

    UX: external => exists p⃗. internal{p⃗/pvars} (* ret = E{p⃗/pvars} for ok);
    OX: the reverse implication.
    """
    spec = ispec.spec
    external = spec.post(which) or AFalse()
    pvars = sorted(pv(internal_post) | ({"ret"} if which == "ok" else set()) | set(spec.params) | set(ispec.locals))
    fresh = {p: LVar(f"{p}@") for p in pvars}
    mapping: dict[Term, Term] = {PVar(p): v for p, v in fresh.items()}
    renamed = subst_assertion(internal_post, mapping)
    if which == "ok":
        ret_term = subst(ispec.ret_expr, mapping)
        renamed = star([renamed, Pure(BinOp("=", PVar("ret"), ret_term))])
    closed = Exists(tuple(v.name for v in fresh.values()), renamed) if fresh else renamed
    if spec.mode == "ux":
        return external, closed
    return closed, external


# ---------------------------------------------------------------------------
# JSON export


def term_json(t: Term):
    """A structured tree for machine consumption, alongside the printed form."""
    if isinstance(t, Lit):
        v = t.value
        if isinstance(v, VNat):
            return {"nat": v.n}
        if isinstance(v, VStr):
            return {"str": v.s}
        if isinstance(v, VList):
            return {"list": [term_json(Lit(i)) for i in v.items]}
        from .terms import VBool, VNil

        if isinstance(v, VBool):
            return {"bool": v.b}
        return {"nil": True}
    if isinstance(t, LVar):
        return {"lvar": t.name}
    if isinstance(t, PVar):
        return {"pvar": t.name}
    if isinstance(t, SymVar):
        return {"symvar": t.name}
    if isinstance(t, ListTerm):
        return {"list": [term_json(i) for i in t.items]}
    if isinstance(t, TypeTest):
        return {"typetest": t.ty, "positive": t.positive, "arg": term_json(t.arg)}
    if isinstance(t, UnOp):
        return {"op": t.op, "args": [term_json(t.arg)]}
    if isinstance(t, BinOp):
        return {"op": t.op, "args": [term_json(t.left), term_json(t.right)]}
    raise TypeError(f"not a term: {t!r}")


def assertion_json(p: Assertion):
    if isinstance(p, Pure):
        return {"pure": term_json(p.expr)}
    if isinstance(p, AFalse):
        return {"false": True}
    if isinstance(p, Emp):
        return {"emp": True}
    if isinstance(p, Implies):
        return {"implies": [assertion_json(p.left), assertion_json(p.right)]}
    if isinstance(p, AOr):
        return {"or": [assertion_json(p.left), assertion_json(p.right)]}
    if isinstance(p, Exists):
        return {"exists": list(p.names), "body": assertion_json(p.body)}
    if isinstance(p, Cell):
        return {"cell": {"addr": term_json(p.addr), "content": term_json(p.content)}}
    if isinstance(p, CellFreed):
        return {"freed": term_json(p.addr)}
    if isinstance(p, Star):
        return {"star": [assertion_json(q) for q in p.parts]}
    if isinstance(p, PredAssert):
        return {
            "pred": p.name,
            "ins": [term_json(t) for t in p.ins],
            "outs": [term_json(t) for t in p.outs],
        }
    raise TypeError(f"not an assertion: {p!r}")


def spec_json(spec: Spec) -> dict:
    out = {
        "mode": spec.mode,
        "function": spec.fname,
        "params": list(spec.params),
        "pre": print_assertion(spec.full_pre()),
        "pre_tree": assertion_json(spec.full_pre()),
    }
    for which in ("ok", "err"):
        post = spec.post(which)
        if post is not None:
            out[f"{which}_post"] = print_assertion(post)
            out[f"{which}_post_tree"] = assertion_json(post)
    if spec.name:
        out["label"] = spec.name
    return out


# ---------------------------------------------------------------------------
# Printing


def _surface(t: Term, prec: int = 0) -> str:
    if isinstance(t, LVar):
        return t.name
    if isinstance(t, PVar):
        return t.name
    if isinstance(t, SymVar):
        return "$" + t.name
    if isinstance(t, Lit):
        return repr(t.value)
    if isinstance(t, ListTerm):
        return "[" + ", ".join(_surface(i) for i in t.items) + "]"
    if isinstance(t, TypeTest):
        s = f"{_surface(t.arg, 8)} {'in' if t.positive else 'notin'} {t.ty}"
        return f"({s})" if prec > 0 else s
    if isinstance(t, UnOp):
        if t.op == "len":
            return f"len({_surface(t.arg)})"
        return f"not {_surface(t.arg, 8)}"
    if isinstance(t, BinOp):
        from .terms import _PREC

        p = _PREC[t.op]
        s = f"{_surface(t.left, p)} {t.op} {_surface(t.right, p + 1)}"
        return f"({s})" if prec > p else s
    raise TypeError(f"not a term: {t!r}")


def print_assertion(p: Assertion) -> str:
    if isinstance(p, Pure):
        e = _surface(p.expr)
        return f"({e})" if isinstance(p.expr, BinOp) and p.expr.op in ("and", "or") else e
    if isinstance(p, AFalse):
        return "False"
    if isinstance(p, Emp):
        return "emp"
    if isinstance(p, Implies):
        return f"({print_assertion(p.left)} => {print_assertion(p.right)})"
    if isinstance(p, AOr):
        return f"({print_assertion(p.left)}) \\/ ({print_assertion(p.right)})"
    if isinstance(p, Exists):
        return f"exists {', '.join(p.names)}. {print_assertion(p.body)}"
    if isinstance(p, Cell):
        return f"{_surface(p.addr, 8)} -> {_surface(p.content, 4)}"
    if isinstance(p, CellFreed):
        return f"{_surface(p.addr, 8)} -> freed"
    if isinstance(p, Star):
        return " * ".join(print_assertion(q) for q in p.parts)
    if isinstance(p, PredAssert):
        ins = ", ".join(_surface(t) for t in p.ins)
        outs = ", ".join(_surface(t) for t in p.outs)
        return f"{p.name}({ins}; {outs})" if p.outs else f"{p.name}({ins};)"
    raise TypeError(f"not an assertion: {p!r}")
