"""Shared independent oracles and generators for the test-suite.

Everything here is deliberately brute-force: enumeration over bounded value
domains, permutation search, and direct satisfaction checks. These are the
references the optimised implementations are measured against.
"""

from __future__ import annotations

import itertools
import random
from typing import Iterable, Iterator, Optional

from cse import speclang as sl
from cse import syntax as sx
from cse.concrete import CState
from cse.solver import Interpretation, eval_under
from cse.symstate import FREED, PredInstance, SymHeap, SymState
from cse.terms import (
    NIL,
    TRUE,
    FALSE,
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
    VBool,
    VList,
    VNat,
    VStr,
    Value,
    mk,
)

SMALL_DOMAIN: list[Value] = [VNat(0), VNat(1), VNat(2), VNat(5), VNat(10), NIL, TRUE]


# ---------------------------------------------------------------------------
# Heap and assertion-model enumeration


def enumerate_heaps(
    contents: Iterable, max_cells: int, addrs: Iterable[int]
) -> Iterator[dict[int, object]]:
    addrs = list(addrs)
    contents = list(contents)
    for r in range(max_cells + 1):
        for chosen in itertools.combinations(addrs, r):
            for vals in itertools.product(contents, repeat=r):
                yield dict(zip(chosen, vals))


def assertion_models(
    theta: dict[str, Value],
    p: sl.Assertion,
    preds: sl.PredTable,
    domain: list[Value],
    depth: int = 4,
    store: Optional[dict[str, Value]] = None,
) -> Iterator[tuple[dict[str, Value], dict[int, object]]]:
    """All (theta-extension, heap) pairs satisfying `p`, built structurally.

    Cross-checked against assertion_sat in the tests that use it.
    """
    yield from _models(theta, store or {}, p, preds, domain, depth)


def _models(theta, store, p, preds, domain, depth):
    if isinstance(p, sl.Pure):
        v = _eval(p.expr, theta, store)
        if v == TRUE:
            yield dict(theta), {}
        return
    if isinstance(p, sl.Emp):
        yield dict(theta), {}
        return
    if isinstance(p, sl.AFalse):
        return
    if isinstance(p, sl.AOr):
        yield from _models(theta, store, p.left, preds, domain, depth)
        yield from _models(theta, store, p.right, preds, domain, depth)
        return
    if isinstance(p, sl.Exists):
        for combo in itertools.product(domain, repeat=len(p.names)):
            t2 = dict(theta)
            t2.update(zip(p.names, combo))
            yield from _models(t2, store, p.body, preds, domain, depth)
        return
    if isinstance(p, sl.Cell):
        a = _eval(p.addr, theta, store)
        v = _eval(p.content, theta, store)
        if isinstance(a, VNat) and isinstance(v, Value):
            yield dict(theta), {a.n: v}
        return
    if isinstance(p, sl.CellFreed):
        a = _eval(p.addr, theta, store)
        if isinstance(a, VNat):
            yield dict(theta), {a.n: FREED}
        return
    if isinstance(p, sl.Star):
        yield from _star_models(theta, store, list(p.parts), preds, domain, depth)
        return
    if isinstance(p, sl.PredAssert):
        if depth <= 0 or p.name not in preds:
            return
        d = preds[p.name]
        t2 = {}
        for name, e in zip(d.ins + d.outs, p.ins + p.outs):
            v = _eval(e, theta, store)
            if not isinstance(v, Value):
                return
            t2[name] = v
        for binders, parts in d.disjuncts:
            body = sl.Exists(binders, sl.star(parts)) if binders else sl.star(parts)
            for _, heap in _models(t2, store, body, preds, domain, depth - 1):
                yield dict(theta), heap
        return
    raise TypeError(f"no model enumeration for {p!r}")


def _star_models(theta, store, parts, preds, domain, depth):
    if not parts:
        yield dict(theta), {}
        return
    for t1, h1 in _models(theta, store, parts[0], preds, domain, depth):
        for t2, h2 in _star_models(t1, store, parts[1:], preds, domain, depth):
            if set(h1) & set(h2):
                continue
            yield t2, {**h1, **h2}


def _eval(e: Term, theta: dict[str, Value], store: dict[str, Value]):
    from cse.terms import eval_term

    def look(leaf):
        if isinstance(leaf, LVar):
            return theta.get(leaf.name)
        if isinstance(leaf, PVar):
            return store.get(leaf.name)
        return None

    return eval_term(e, look)


# ---------------------------------------------------------------------------
# Symbolic-state models


def state_interpretations(
    state: SymState, domain: list[Value], extra_vars: Iterable[str] = ()
) -> Iterator[Interpretation]:
    """All assignments of the state's symbolic variables over the domain that
    make the path condition true."""
    names = sorted(state.sym_vars() | state.pc.sym_vars() | set(extra_vars))
    pc_term = state.pc.term()
    for combo in itertools.product(domain, repeat=len(names)):
        interp = dict(zip(names, combo))
        if eval_under(pc_term, interp) == TRUE:
            yield interp


def concrete_of(state: SymState, interp: Interpretation) -> Optional[CState]:
    from cse.symstate import interp_state

    return interp_state(state, interp)


# ---------------------------------------------------------------------------
# Alpha-equivalence of assertions, specs, and symbolic states


def _name_skeleton(s: str) -> str:
    return s


def alpha_assertion_key(p: sl.Assertion):
    """A canonical key invariant under logical-variable renaming and
    *-reordering (existential binders included)."""
    binders: tuple[str, ...] = ()
    if isinstance(p, sl.Exists):
        binders, p = p.names, p.body
    parts = p.parts if isinstance(p, sl.Star) else (p,)
    ordered = sorted(parts, key=_skeleton_assertion)
    numbering: dict[str, int] = {}

    def num(name: str) -> str:
        if name not in numbering:
            numbering[name] = len(numbering)
        return f"v{numbering[name]}"

    rendered = [_render_assertion(q, num) for q in ordered]
    return tuple(rendered), len(binders)


def _skeleton_assertion(q: sl.Assertion) -> str:
    return _render_assertion(q, lambda name: "_")


def _render_assertion(q: sl.Assertion, num) -> str:
    if isinstance(q, sl.Pure):
        return "P:" + _render_term(q.expr, num)
    if isinstance(q, sl.Cell):
        return "C:" + _render_term(q.addr, num) + "->" + _render_term(q.content, num)
    if isinstance(q, sl.CellFreed):
        return "F:" + _render_term(q.addr, num)
    if isinstance(q, sl.PredAssert):
        return (
            "Q:"
            + q.name
            + "("
            + ",".join(_render_term(t, num) for t in q.ins)
            + ";"
            + ",".join(_render_term(t, num) for t in q.outs)
            + ")"
        )
    if isinstance(q, sl.Emp):
        return "E"
    if isinstance(q, sl.AFalse):
        return "⊥"
    if isinstance(q, sl.AOr):
        return "O:(" + _render_assertion(q.left, num) + ")|(" + _render_assertion(q.right, num) + ")"
    if isinstance(q, sl.Exists):
        inner = _render_assertion(q.body, num)
        return f"X{len(q.names)}:" + inner
    raise TypeError(f"{q!r}")


def _render_term(t: Term, num) -> str:
    if isinstance(t, Lit):
        if isinstance(t.value, VList):  # canonical with ListTerm rendering
            return "[" + ",".join(_render_term(Lit(v), num) for v in t.value.items) + "]"
        return repr(t.value)
    if isinstance(t, LVar):
        return num(t.name)
    if isinstance(t, PVar):
        return t.name
    if isinstance(t, SymVar):
        return "$" + num("$" + t.name)
    if isinstance(t, ListTerm):
        return "[" + ",".join(_render_term(i, num) for i in t.items) + "]"
    if isinstance(t, TypeTest):
        return f"({_render_term(t.arg, num)}{'∈' if t.positive else '∉'}{t.ty})"
    if isinstance(t, UnOp):
        return f"{t.op}({_render_term(t.arg, num)})"
    if isinstance(t, BinOp):
        return f"({_render_term(t.left, num)}{t.op}{_render_term(t.right, num)})"
    raise TypeError(f"{t!r}")


def alpha_spec_key(spec: sl.Spec):
    return (
        spec.mode,
        spec.fname,
        spec.params,
        alpha_assertion_key(spec.full_pre()),
        alpha_assertion_key(spec.ok_post) if spec.ok_post is not None else None,
        alpha_assertion_key(spec.err_post) if spec.err_post is not None else None,
    )


def normalize_state_pc(state: SymState, solver) -> SymState:
    """Drop pc conjuncts entailed by the remaining ones (left to right);
    states that differ only in such redundancy then share an alpha key."""
    conjuncts = list(state.pc.conjuncts)
    i = 0
    while i < len(conjuncts):
        rest = conjuncts[:i] + conjuncts[i + 1 :]
        from cse.terms import PC as _PC

        if rest and solver.entails(_PC(tuple(rest)), conjuncts[i]) is True:
            conjuncts = rest
        else:
            i += 1
    from cse.terms import PC as _PC

    return state.with_pc(_PC(tuple(conjuncts)))


def alpha_state_key(outcome, state: SymState):
    """Canonical key for (outcome, symbolic state) up to symvar renaming and
    pc-conjunct reordering. Conjuncts sharing a variable-blind skeleton keep
    input order, so identically-shaped swaps can in principle differ; fine
    at this suite's scale."""
    numbering: dict[str, int] = {}

    def num(name: str) -> str:
        if name not in numbering:
            numbering[name] = len(numbering)
        return f"v{numbering[name]}"

    parts = []
    for x, t in sorted(state.store, key=lambda kv: kv[0]):
        parts.append(f"s:{x}={_render_term(t, num)}")
    for a, c in state.heap.cells:
        cc = "freed" if c is FREED else _render_term(c, num)
        parts.append(f"h:{_render_term(a, num)}->{cc}")
    for p in state.preds:
        parts.append(
            f"p:{p.name}({','.join(_render_term(t, num) for t in p.ins)};"
            f"{','.join(_render_term(t, num) for t in p.outs)})"
        )
    def peek(name: str) -> str:
        return f"v{numbering[name]}" if name in numbering else "?"

    ordered = sorted(state.pc.conjuncts, key=lambda c: _render_term(c, peek))
    for c in ordered:
        parts.append(f"c:{_render_term(c, num)}")
    return (outcome, tuple(parts))


# ---------------------------------------------------------------------------
# Random generators (plain random.Random for reproducibility)

EXPR_VARS = ("x", "y", "z")


def random_value(rng: random.Random, depth: int = 1) -> Value:
    kind = rng.randrange(6 if depth > 0 else 5)
    if kind == 0:
        return VNat(rng.choice((0, 1, 2, 5, 10)))
    if kind == 1:
        return VBool(rng.random() < 0.5)
    if kind == 2:
        return NIL
    if kind == 3:
        return VStr(rng.choice(("a", "b")))
    if kind == 4:
        return VNat(rng.randrange(4))
    return VList(tuple(random_value(rng, depth - 1) for _ in range(rng.randrange(3))))


def random_expr(rng: random.Random, vars_: tuple[str, ...] = EXPR_VARS, depth: int = 2) -> Term:
    if depth == 0 or rng.random() < 0.35:
        if rng.random() < 0.5:
            return PVar(rng.choice(vars_))
        return Lit(random_value(rng))
    kind = rng.randrange(10)
    if kind == 0:
        return UnOp("not", random_expr(rng, vars_, depth - 1))
    if kind == 1:
        return UnOp("len", random_expr(rng, vars_, depth - 1))
    if kind == 2:
        return TypeTest(random_expr(rng, vars_, depth - 1), rng.choice(("Nat", "Bool", "List", "Val")))
    if kind == 3:
        items = tuple(random_expr(rng, vars_, depth - 1) for _ in range(rng.randrange(3)))
        if all(isinstance(i, Lit) for i in items):  # canonical ground lists
            return Lit(VList(tuple(i.value for i in items)))
        return ListTerm(items)
    op = rng.choice(("+", "-", "*", "/", "<", "<=", ">", ">=", "=", "!=", "and", "or", "::"))
    return BinOp(op, random_expr(rng, vars_, depth - 1), random_expr(rng, vars_, depth - 1))


def random_cmd(rng: random.Random, size: int, vars_: tuple[str, ...] = EXPR_VARS) -> sx.Cmd:
    """A random command with roughly `size` atomic commands, no calls and no
    ghost commands (the Thm 4.1 fragment). Sequences are left-associated,
    matching the parser's canonical shape."""
    parts: list[sx.Cmd] = []
    budget = size
    while budget > 0:
        if budget >= 2 and rng.random() < 0.25:
            take = rng.randrange(2, budget + 1)
            cond = random_expr(rng, vars_, 1)
            left = rng.randrange(1, take)
            parts.append(
                sx.IfElse(
                    cond,
                    random_cmd(rng, left, vars_),
                    random_cmd(rng, take - left, vars_),
                )
            )
            budget -= take
        else:
            parts.append(_random_atomic(rng, vars_))
            budget -= 1
    out = parts[0]
    for p in parts[1:]:
        out = sx.Seq(out, p)
    return out


def _random_atomic(rng: random.Random, vars_: tuple[str, ...]) -> sx.Cmd:
    kind = rng.randrange(12)
    x = rng.choice(vars_)
    if kind == 0:
        return sx.Skip()
    if kind == 1:
        return sx.Assign(x, random_expr(rng, vars_))
    if kind == 2:
        return sx.Nondet(x)
    if kind == 3:
        return sx.Sym(x)
    if kind == 4:
        return sx.Error(random_expr(rng, vars_, 1))
    if kind == 5:
        return sx.Lookup(x, random_expr(rng, vars_, 1))
    if kind == 6:
        return sx.Mutate(random_expr(rng, vars_, 1), random_expr(rng, vars_, 1))
    if kind == 7:
        return sx.New(x, rng.randrange(3))
    if kind == 8:
        return sx.Free(random_expr(rng, vars_, 1))
    if kind == 9:
        return sx.Assume(random_expr(rng, vars_, 1))
    if kind == 10:
        return sx.Assert(random_expr(rng, vars_, 1))
    return sx.Assign(x, random_expr(rng, vars_, 1))


def random_concrete_state(
    rng: random.Random,
    vars_: tuple[str, ...],
    addrs: Iterable[int],
    max_cells: int = 2,
) -> CState:
    store = {x: random_value(rng) for x in vars_}
    pool = list(addrs)
    heap: dict[int, object] = {}
    for a in rng.sample(pool, k=min(rng.randrange(max_cells + 1), len(pool))):
        heap[a] = FREED if rng.random() < 0.15 else random_value(rng)
    return CState(store, heap)
