"""Satisfiability, entailment, and bounded model enumeration for path conditions.

The internal backend enumerates models over an adaptive finite domain built
from the formula's own literals plus a small base set; Sat answers are always
witnessed. Unsat means no model within that bound (the backend's theory is
the bounded domain); candidate spaces beyond the budget give Unknown.

An external SMT-LIB2 backend can be plugged in over a child process; values
are encoded as one algebraic sort with guarded partial operators.
"""

from __future__ import annotations

import enum
import itertools
import subprocess
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

from .terms import (
    FALSE_T,
    NIL,
    TRUE,
    TRUE_T,
    FALSE,
    UNDEF,
    BinOp,
    Lit,
    ListTerm,
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
    eval_term,
    fold,
    neg,
    subst,
    sv,
)

Interpretation = dict[str, Value]


class SatResult(enum.Enum):
    SAT = "sat"
    UNSAT = "unsat"
    UNKNOWN = "unknown"


def eval_under(t: Term, interp: Interpretation):
    """Evaluate a symbolic term under an interpretation; UNDEF if it faults."""
    return eval_term(
        t, lambda leaf: interp.get(leaf.name) if isinstance(leaf, SymVar) else None
    )


def holds(t: Term, interp: Interpretation) -> bool:
    return eval_under(t, interp) == TRUE


def _conjunct_list(phi: Union[Term, PC, Iterable[Term]]) -> list[Term]:
    if isinstance(phi, PC):
        items = list(phi.conjuncts)
    elif isinstance(phi, Term):
        items = [phi]
    else:
        items = list(phi)
    out: list[Term] = []
    stack = list(reversed(items))
    while stack:
        t = stack.pop()
        if isinstance(t, BinOp) and t.op == "and":
            stack.append(t.right)
            stack.append(t.left)
        else:
            out.append(fold(t))
    return out


# ---------------------------------------------------------------------------
# Adaptive domain construction


def _harvest(ts: Iterable[Term]) -> tuple[set[int], set[str], set[VList]]:
    nats: set[int] = set()
    strs: set[str] = set()
    lists: set[VList] = set()

    def visit_value(v: Value) -> None:
        if isinstance(v, VNat):
            nats.add(v.n)
        elif isinstance(v, VStr):
            strs.add(v.s)
        elif isinstance(v, VList):
            lists.add(v)
            for suffix in range(1, len(v.items) + 1):
                lists.add(VList(v.items[suffix:]))
            for item in v.items:
                visit_value(item)

    stack = list(ts)
    while stack:
        t = stack.pop()
        if isinstance(t, Lit):
            visit_value(t.value)
        elif isinstance(t, ListTerm):
            stack.extend(t.items)
        elif isinstance(t, TypeTest):
            stack.append(t.arg)
        elif isinstance(t, UnOp):
            stack.append(t.arg)
        elif isinstance(t, BinOp):
            stack.append(t.left)
            stack.append(t.right)
    return nats, strs, lists


def adaptive_domain(conjuncts: Sequence[Term], base_nat_max: int = 4) -> list[Value]:
    """Candidate values: formula literals (and ±1 nats), small naturals,
    booleans, nil, harvested lists plus empty/singleton lists."""
    nats, strs, lists = _harvest(conjuncts)
    cand_nats: set[int] = set(range(base_nat_max + 1))
    for n in nats:
        cand_nats.update({n, n + 1, max(n - 1, 0)})
    out: list[Value] = [VNat(n) for n in sorted(cand_nats)]
    out.extend([TRUE, FALSE, NIL])
    out.extend(VStr(s) for s in sorted(strs))
    base_lists: set[VList] = {VList(())} | lists
    for atom in (VNat(0), VNat(1), NIL):
        base_lists.add(VList((atom,)))
    out.extend(sorted(base_lists, key=repr))
    return out


# ---------------------------------------------------------------------------
# Internal backend: propagation + bounded enumeration


def _constructor_only(t: Term) -> bool:
    """Terms that are defined whenever their leaves are (no partial ops)."""
    if isinstance(t, (Lit, SymVar)):
        return True
    if isinstance(t, ListTerm):
        return all(_constructor_only(i) for i in t.items)
    return False


def _peel_list(t: Term) -> Optional[tuple[list[Term], Optional[Term]]]:
    """View a term as list-shaped: (head elements, open tail or None)."""
    if isinstance(t, Lit) and isinstance(t.value, VList):
        return [Lit(v) for v in t.value.items], None
    if isinstance(t, ListTerm):
        return list(t.items), None
    if isinstance(t, BinOp) and t.op == "::":
        rest = _peel_list(t.right)
        if rest is None:
            return [t.left], t.right
        heads, tail = rest
        return [t.left] + heads, tail
    return None


def _rebuild_list(heads: list[Term], tail: Optional[Term]) -> Term:
    if tail is None:
        return fold(ListTerm(tuple(heads)))
    out = tail
    for h in reversed(heads):
        out = BinOp("::", h, out)
    return out


def decompose_equality(c: Term) -> Optional[list[Term]]:
    """Split a list-shaped equality conjunct into head/tail equalities.

    Only valid where the conjunct is required to be true: the decomposition
    and the original agree on truth (faulting sides are never true on either
    form). Returns None when there is nothing to split.
    """
    if not (isinstance(c, BinOp) and c.op == "="):
        return None
    pa, pb = _peel_list(c.left), _peel_list(c.right)
    if pa is None or pb is None:
        return None
    ha, ta = pa
    hb, tb = pb
    if not ha and not hb:
        return []  # both are the empty list
    if not ha or not hb:
        return [FALSE_T]  # a non-empty list shape never equals the empty list
    out = [TypeTest(t, "List") for t in (ta, tb) if t is not None]
    out.append(fold(BinOp("=", ha[0], hb[0])))
    rest = fold(
        BinOp("=", _rebuild_list(ha[1:], ta), _rebuild_list(hb[1:], tb))
    )
    if rest != TRUE_T:
        out.append(rest)
    return out


@dataclass
class InternalBackend:
    base_nat_max: int = 4
    max_product: int = 400_000

    def check(self, conjuncts: list[Term]) -> tuple[SatResult, Optional[Interpretation]]:
        work = list(conjuncts)
        expanded: list[Term] = []
        while work:
            c = work.pop(0)
            got = decompose_equality(c)
            if got is None:
                expanded.append(c)
            else:
                work = got + work
        conjuncts = [c for c in expanded if c != TRUE_T]
        # Quick syntactic refutations are bound-independent.
        for c in conjuncts:
            if c == FALSE_T:
                return SatResult.UNSAT, None
            if isinstance(c, BinOp) and c.op == "!=" and c.left == c.right:
                return SatResult.UNSAT, None
        conjuncts, bindings = self._propagate(conjuncts)
        if conjuncts is None:
            return SatResult.UNSAT, None

        vars_: set[str] = set()
        for c in conjuncts:
            vars_ |= sv(c)
        for t in bindings.values():
            vars_ |= sv(t)
        order = sorted(vars_)

        domain = adaptive_domain(conjuncts + list(bindings.values()), self.base_nat_max)
        candidates: dict[str, list[Value]] = {x: list(domain) for x in order}

        # Prefilter each variable by its single-variable conjuncts; only
        # variables appearing in multi-variable conjuncts need enumeration.
        residual: list[Term] = []
        for c in conjuncts:
            cv = sv(c)
            if len(cv) == 1:
                (x,) = cv
                candidates[x] = [v for v in candidates[x] if holds(c, {x: v})]
                if not candidates[x]:
                    return SatResult.UNSAT, None
            elif cv:
                residual.append(c)
            else:
                # Ground but unfoldable: faults, hence never true.
                return SatResult.UNSAT, None

        enum_vars = sorted(set().union(set(), *(sv(c) for c in residual)))
        free_vars = [x for x in order if x not in enum_vars]

        product = 1
        for x in enum_vars:
            product *= max(len(candidates[x]), 1)
        if product > self.max_product:
            return SatResult.UNKNOWN, None

        for combo in itertools.product(*(candidates[x] for x in enum_vars)):
            interp = dict(zip(enum_vars, combo))
            if all(holds(c, interp) for c in residual):
                full = dict(interp)
                for x in free_vars:
                    full[x] = candidates[x][0]
                ok = True
                for x, t in bindings.items():
                    v = eval_under(t, full)
                    if v is UNDEF:
                        ok = False
                        break
                    full[x] = v
                if ok:
                    return SatResult.SAT, full
        return SatResult.UNSAT, None

    def forall_true(self, conjuncts: list[Term], goal: Term) -> SatResult:
        """Does every model of the conjuncts make `goal` evaluate to true?

        Unlike not-sat-of-negation, this sees faulting evaluations (a goal
        that is undefined under some model is not entailed). SAT means
        entailed, UNSAT means a countermodel exists, within the bound.
        """
        work = list(conjuncts)
        expanded: list[Term] = []
        while work:
            c = work.pop(0)
            got = decompose_equality(c)
            if got is None:
                expanded.append(c)
            else:
                work = got + work
        conjuncts = [c for c in expanded if c != TRUE_T]
        for c in conjuncts:
            if c == FALSE_T:
                return SatResult.SAT  # vacuous
            if isinstance(c, BinOp) and c.op == "!=" and c.left == c.right:
                return SatResult.SAT
        got = self._propagate(conjuncts)
        if got[0] is None:
            return SatResult.SAT
        conjuncts, bindings = got
        goal = fold(subst(goal, {SymVar(x): t for x, t in bindings.items()}))
        if goal == TRUE_T:
            return SatResult.SAT

        vars_: set[str] = set(sv(goal))
        for c in conjuncts:
            vars_ |= sv(c)
        for t in bindings.values():
            vars_ |= sv(t)
        order = sorted(vars_)
        domain = adaptive_domain(
            conjuncts + [goal] + list(bindings.values()), self.base_nat_max
        )
        candidates: dict[str, list[Value]] = {x: list(domain) for x in order}
        residual: list[Term] = []
        for c in conjuncts:
            cv = sv(c)
            if len(cv) == 1:
                (x,) = cv
                candidates[x] = [v for v in candidates[x] if holds(c, {x: v})]
                if not candidates[x]:
                    return SatResult.SAT  # no models at all
            elif cv:
                residual.append(c)
            else:
                return SatResult.SAT
        enum_vars = sorted(
            set(sv(goal)).union(set(), *(sv(c) for c in residual))
        )
        product = 1
        for x in enum_vars:
            product *= max(len(candidates[x]), 1)
        if product > self.max_product:
            return SatResult.UNKNOWN
        for combo in itertools.product(*(candidates[x] for x in enum_vars)):
            interp = dict(zip(enum_vars, combo))
            if all(holds(c, interp) for c in residual):
                if eval_under(goal, interp) != TRUE:
                    return SatResult.UNSAT
        return SatResult.SAT

    def _propagate(
        self, conjuncts: list[Term]
    ) -> tuple[Optional[list[Term]], dict[str, Term]]:
        """Eliminate x = t conjuncts with constructor-only t by substitution."""
        bindings: dict[str, Term] = {}
        work = list(conjuncts)
        changed = True
        while changed:
            changed = False
            for i, c in enumerate(work):
                if not (isinstance(c, BinOp) and c.op == "="):
                    continue
                for var, rhs in ((c.left, c.right), (c.right, c.left)):
                    if (
                        isinstance(var, SymVar)
                        and var.name not in sv(rhs)
                        and _constructor_only(rhs)
                    ):
                        mapping = {var: rhs}
                        work = [fold(subst(d, mapping)) for d in work[:i] + work[i + 1 :]]
                        for x in list(bindings):
                            bindings[x] = fold(subst(bindings[x], mapping))
                        bindings[var.name] = rhs
                        changed = True
                        break
                if changed:
                    break
            if any(d == FALSE_T for d in work):
                return None, bindings
            work = [d for d in work if d != TRUE_T]
        return work, bindings


# ---------------------------------------------------------------------------
# Solver facade


@dataclass
class Solver:
    backend: object = None
    internal: InternalBackend = field(default_factory=InternalBackend)
    _cache: dict = field(default_factory=dict)
    queries: int = 0
    cache_hits: int = 0

    def check_sat(self, phi: Union[Term, PC, Iterable[Term]]) -> SatResult:
        return self._check(phi)[0]

    def model(self, phi: Union[Term, PC, Iterable[Term]]) -> Optional[Interpretation]:
        res, m = self._check(phi)
        return m if res is SatResult.SAT else None

    def _check(self, phi) -> tuple[SatResult, Optional[Interpretation]]:
        conjuncts = _conjunct_list(phi)
        key = frozenset(conjuncts)
        if key in self._cache:
            self.cache_hits += 1
            return self._cache[key]
        self.queries += 1
        if self.backend is not None:
            res = self.backend.check_sat(conjuncts)
            out = (res, None)
            if res is SatResult.UNKNOWN:
                out = self.internal.check(conjuncts)  # fall back for a witness
        else:
            out = self.internal.check(conjuncts)
        self._cache[key] = out
        return out

    def is_sat(self, phi) -> bool:
        return self.check_sat(phi) is SatResult.SAT

    def entails(self, pc: Union[PC, Term], t: Term) -> Union[bool, SatResult]:
        """pc => t in the semantic sense: every model of pc makes t evaluate
        to true. Not-sat-of-negation would miss goals that fault; the strict
        three-valued reading needs the direct check. Unknown propagates."""
        conjuncts = _conjunct_list(pc)
        t = fold(t)
        key = ("entails", frozenset(conjuncts), t)
        if key in self._cache:
            self.cache_hits += 1
            return self._cache[key]
        self.queries += 1
        res: Union[bool, SatResult]
        if self.backend is not None:
            got = self.backend.check_entails(conjuncts, t)
            if got is SatResult.UNSAT:
                res = True
            elif got is SatResult.SAT:
                res = False
            else:
                res = self._entails_internal(conjuncts, t)
        else:
            res = self._entails_internal(conjuncts, t)
        self._cache[key] = res
        return res

    def _entails_internal(self, conjuncts: list[Term], t: Term) -> Union[bool, SatResult]:
        got = self.internal.forall_true(conjuncts, t)
        if got is SatResult.SAT:
            return True
        if got is SatResult.UNSAT:
            return False
        return SatResult.UNKNOWN

    # -- path-condition extension with display-friendly simplification

    def extend_pc(self, pc: PC, *facts: Term) -> PC:
        """Conjoin facts, skipping ones already entailed (unless they bind new
        symbolic variables) and absorbing type-test conjuncts the new fact
        subsumes. Semantics-preserving at the solver's bound."""
        known = pc.sym_vars()
        out = list(pc.conjuncts)
        for f in facts:
            f = fold(f)
            if f == TRUE_T:
                continue
            for g in _conjunct_list([f]):
                if g in out:
                    continue
                gv = sv(g)
                if gv <= known and self.entails(PC(tuple(out)), g) is True:
                    continue
                absorbed = [
                    d
                    for d in out
                    if isinstance(d, TypeTest)
                    and d.positive
                    and sv(d) <= gv
                    and self.entails(PC((g,)), d) is True
                ]
                if absorbed:
                    out = [d for d in out if d not in absorbed]
                out.append(g)
                known |= gv
        return PC(tuple(out))


def enumerate_models(
    phi: Union[Term, PC, Iterable[Term]],
    domain: Sequence[Value],
    variables: Iterable[str],
) -> list[Interpretation]:
    """Exactly the assignments over domain^vars satisfying phi, in order.

    Deliberately exhaustive and propagation-free: this is the independent
    oracle the property suites check the optimised backend against.
    """
    conjuncts = _conjunct_list(phi)
    order = sorted(set(variables))
    out: list[Interpretation] = []
    for combo in itertools.product(domain, repeat=len(order)):
        interp = dict(zip(order, combo))
        if all(holds(c, interp) for c in conjuncts):
            out.append(interp)
    return out


# ---------------------------------------------------------------------------
# External SMT-LIB2 backend


class SmtEncodingError(Exception):
    pass


class SmtBackend:
    """Text-protocol adapter: one (check-sat) per query over a child process."""

    def __init__(self, binary: str, timeout: float = 10.0):
        self.binary = binary
        self.timeout = timeout

    def check_sat(self, conjuncts: list[Term]) -> SatResult:
        try:
            script = encode_query(conjuncts)
        except SmtEncodingError:
            return SatResult.UNKNOWN
        return self._run(script)

    def check_entails(self, conjuncts: list[Term], goal: Term) -> SatResult:
        """SAT means a countermodel exists; UNSAT means entailed."""
        try:
            script = encode_query(conjuncts, negate_goal=goal)
        except SmtEncodingError:
            return SatResult.UNKNOWN
        return self._run(script)

    def _run(self, script: str) -> SatResult:
        try:
            proc = subprocess.run(
                [self.binary, "-in"] if "z3" in self.binary else [self.binary],
                input=script,
                capture_output=True,
                text=True,
                timeout=self.timeout,
            )
        except (OSError, subprocess.TimeoutExpired):
            return SatResult.UNKNOWN
        for line in proc.stdout.splitlines():
            tok = line.strip()
            if tok == "sat":
                return SatResult.SAT
            if tok == "unsat":
                return SatResult.UNSAT
            if tok == "unknown":
                return SatResult.UNKNOWN
        return SatResult.UNKNOWN


def _mutual_prelude() -> str:
    # wf-val and wf-vl are mutually recursive; emit with define-funs-rec.
    return """\
(set-logic ALL)
(declare-datatypes ((Val 0) (VL 0))
  (((VNat (natval Int)) (VBool (boolval Bool)) (VStr (strid Int)) (VNil) (VList (lstval VL)))
   ((vl-nil) (vl-cons (vl-hd Val) (vl-tl VL)))))
(define-fun-rec vl-len ((l VL)) Int
  (ite ((_ is vl-nil) l) 0 (+ 1 (vl-len (vl-tl l)))))
(define-funs-rec ((wf-val ((v Val)) Bool) (wf-vl ((l VL)) Bool))
  ((ite ((_ is VNat) v) (>= (natval v) 0)
    (ite ((_ is VList) v) (wf-vl (lstval v)) true))
   (ite ((_ is vl-nil) l) true (and (wf-val (vl-hd l)) (wf-vl (vl-tl l))))))
"""


def _enc_value(v: Value, strids: dict[str, int]) -> str:
    if isinstance(v, VNat):
        return f"(VNat {v.n})"
    if isinstance(v, VBool):
        return f"(VBool {'true' if v.b else 'false'})"
    if isinstance(v, VStr):
        return f"(VStr {strids.setdefault(v.s, len(strids))})"
    if isinstance(v, VList):
        inner = "vl-nil"
        for item in reversed(v.items):
            inner = f"(vl-cons {_enc_value(item, strids)} {inner})"
        return f"(VList {inner})"
    return "VNil"


def _enc(t: Term, strids: dict[str, int]) -> tuple[str, str]:
    """Return (definedness formula, value expression) for a term."""
    if isinstance(t, Lit):
        return "true", _enc_value(t.value, strids)
    if isinstance(t, SymVar):
        return "true", f"|{t.name}|"
    if isinstance(t, (PVar, LVar)):
        raise SmtEncodingError(f"non-symbolic leaf {t!r} in solver query")
    if isinstance(t, ListTerm):
        parts = [_enc(i, strids) for i in t.items]
        inner = "vl-nil"
        for _, v in reversed(parts):
            inner = f"(vl-cons {v} {inner})"
        ds = [d for d, _ in parts if d != "true"]
        return _and(ds), f"(VList {inner})"
    if isinstance(t, TypeTest):
        d, v = _enc(t.arg, strids)
        tests = {
            "Val": "true",
            "Nat": f"((_ is VNat) {v})",
            "Bool": f"((_ is VBool) {v})",
            "Str": f"((_ is VStr) {v})",
            "List": f"((_ is VList) {v})",
        }
        bv = tests[t.ty] if t.positive else f"(not {tests[t.ty]})"
        return d, f"(VBool {bv})"
    if isinstance(t, UnOp):
        d, v = _enc(t.arg, strids)
        if t.op == "not":
            return _and([d, f"((_ is VBool) {v})"]), f"(VBool (not (boolval {v})))"
        if t.op == "len":
            return _and([d, f"((_ is VList) {v})"]), f"(VNat (vl-len (lstval {v})))"
        raise SmtEncodingError(f"unary {t.op}")
    if isinstance(t, BinOp):
        d1, v1 = _enc(t.left, strids)
        d2, v2 = _enc(t.right, strids)
        both = [d1, d2]
        if t.op in ("=", "!="):
            v = f"(= {v1} {v2})"
            return _and(both), f"(VBool {v if t.op == '=' else f'(not {v})'})"
        if t.op == "::":
            return (
                _and(both + [f"((_ is VList) {v2})"]),
                f"(VList (vl-cons {v1} (lstval {v2})))",
            )
        if t.op in ("and", "or"):
            guard = [f"((_ is VBool) {v1})", f"((_ is VBool) {v2})"]
            return (
                _and(both + guard),
                f"(VBool ({t.op} (boolval {v1}) (boolval {v2})))",
            )
        nats = [f"((_ is VNat) {v1})", f"((_ is VNat) {v2})"]
        n1, n2 = f"(natval {v1})", f"(natval {v2})"
        if t.op in ("<", "<=", ">", ">="):
            return _and(both + nats), f"(VBool ({t.op} {n1} {n2}))"
        if t.op == "+":
            return _and(both + nats), f"(VNat (+ {n1} {n2}))"
        if t.op == "*":
            return _and(both + nats), f"(VNat (* {n1} {n2}))"
        if t.op == "-":
            return _and(both + nats + [f"(>= {n1} {n2})"]), f"(VNat (- {n1} {n2}))"
        if t.op == "/":
            return _and(both + nats + [f"(distinct {n2} 0)"]), f"(VNat (div {n1} {n2}))"
    raise SmtEncodingError(f"cannot encode {t!r}")


def _and(parts: list[str]) -> str:
    parts = [p for p in parts if p != "true"]
    if not parts:
        return "true"
    if len(parts) == 1:
        return parts[0]
    return "(and " + " ".join(parts) + ")"


def encode_query(conjuncts: list[Term], negate_goal: Optional[Term] = None) -> str:
    strids: dict[str, int] = {}
    lines = [_mutual_prelude()]
    names: set[str] = set()
    for c in conjuncts:
        names |= sv(c)
    if negate_goal is not None:
        names |= sv(negate_goal)
    asserts = []
    for c in conjuncts:
        d, v = _enc(c, strids)
        asserts.append(f"(assert {_and([d, f'(= {v} (VBool true))'])})")
    if negate_goal is not None:
        d, v = _enc(negate_goal, strids)
        asserts.append(f"(assert (not {_and([d, f'(= {v} (VBool true))'])}))")
    for x in sorted(names):
        lines.append(f"(declare-const |{x}| Val)")
        lines.append(f"(assert (wf-val |{x}|))")
    lines.extend(asserts)
    lines.append("(check-sat)")
    return "\n".join(lines) + "\n"


def make_solver(selector: str = "internal", base_nat_max: int = 4) -> Solver:
    """Build a solver from a CLI-style selector: `internal` or `smt:<path>`."""
    if selector == "internal":
        return Solver(internal=InternalBackend(base_nat_max=base_nat_max))
    if selector.startswith("smt:"):
        return Solver(
            backend=SmtBackend(selector[4:]),
            internal=InternalBackend(base_nat_max=base_nat_max),
        )
    raise ValueError(f"unknown solver selector {selector!r}")
