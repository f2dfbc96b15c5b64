"""Values and the shared term algebra.

One term type serves three roles: program expressions (PVar leaves),
symbolic values (SymVar leaves), and logical expressions (LVar leaves).
Evaluation is strict and three-valued: any operator applied outside its
domain yields Undef, and Undef propagates through every operator.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Optional, Union


# ---------------------------------------------------------------------------
# Values


class Value:
    """Base class for runtime values; equality is structural and type-aware."""

    __slots__ = ()


@dataclass(frozen=True, slots=True)
class VNat(Value):
    n: int

    def __post_init__(self) -> None:
        if self.n < 0:
            raise ValueError(f"naturals are non-negative, got {self.n}")

    def __repr__(self) -> str:
        return str(self.n)


@dataclass(frozen=True, slots=True)
class VBool(Value):
    b: bool

    def __repr__(self) -> str:
        return "true" if self.b else "false"


@dataclass(frozen=True, slots=True)
class VStr(Value):
    s: str

    def __repr__(self) -> str:
        return '"' + self.s.replace("\\", "\\\\").replace('"', '\\"') + '"'


@dataclass(frozen=True, slots=True)
class VNil(Value):
    def __repr__(self) -> str:
        return "nil"


@dataclass(frozen=True, slots=True)
class VList(Value):
    items: tuple[Value, ...]

    def __repr__(self) -> str:
        return "[" + ", ".join(repr(v) for v in self.items) + "]"


NIL = VNil()
TRUE = VBool(True)
FALSE = VBool(False)


class _Freed:
    """Marker for freed heap cells; distinct from every Value."""

    _instance: Optional[_Freed] = None

    def __new__(cls) -> _Freed:
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "freed"


FREED = _Freed()


class _Undef:
    """Result of a faulting evaluation; not a Value."""

    _instance: Optional[_Undef] = None

    def __new__(cls) -> _Undef:
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "undef"

    def __bool__(self) -> bool:
        return False


UNDEF = _Undef()

CellContent = Union[Value, _Freed]


def mk(x) -> Value:
    """Lift a Python literal (or nested lists thereof) into a Value."""
    if isinstance(x, Value):
        return x
    if isinstance(x, bool):
        return VBool(x)
    if isinstance(x, int):
        return VNat(x)
    if isinstance(x, str):
        return VStr(x)
    if x is None:
        return NIL
    if isinstance(x, (list, tuple)):
        return VList(tuple(mk(v) for v in x))
    raise TypeError(f"cannot make a value from {x!r}")


# Types of the language; VAL is the top type.
TY_VAL = "Val"
TY_NAT = "Nat"
TY_BOOL = "Bool"
TY_STR = "Str"
TY_LIST = "List"
TYPES = (TY_VAL, TY_NAT, TY_BOOL, TY_STR, TY_LIST)


def has_type(v: Value, ty: str) -> bool:
    if ty == TY_VAL:
        return True
    return {
        TY_NAT: isinstance(v, VNat),
        TY_BOOL: isinstance(v, VBool),
        TY_STR: isinstance(v, VStr),
        TY_LIST: isinstance(v, VList),
    }[ty]


# ---------------------------------------------------------------------------
# Terms


class Term:
    __slots__ = ()

    def __repr__(self) -> str:
        return pretty(self)


@dataclass(frozen=True, slots=True, repr=False)
class Lit(Term):
    value: Value


@dataclass(frozen=True, slots=True, repr=False)
class PVar(Term):
    name: str


@dataclass(frozen=True, slots=True, repr=False)
class SymVar(Term):
    name: str


@dataclass(frozen=True, slots=True, repr=False)
class LVar(Term):
    name: str


@dataclass(frozen=True, slots=True, repr=False)
class UnOp(Term):
    op: str  # "not" | "len"
    arg: Term


@dataclass(frozen=True, slots=True, repr=False)
class BinOp(Term):
    op: str  # + - * / = != < <= > >= and or ::
    left: Term
    right: Term


@dataclass(frozen=True, slots=True, repr=False)
class ListTerm(Term):
    items: tuple[Term, ...]


@dataclass(frozen=True, slots=True, repr=False)
class TypeTest(Term):
    arg: Term
    ty: str
    positive: bool = True


TRUE_T = Lit(TRUE)
FALSE_T = Lit(FALSE)
NIL_T = Lit(NIL)


def nat(n: int) -> Lit:
    return Lit(VNat(n))


COMPARISONS = {"<", "<=", ">", ">="}
ARITH = {"+", "-", "*", "/"}
BOOLOPS = {"and", "or"}


# ---------------------------------------------------------------------------
# Evaluation

Lookup = Callable[[Term], Union[Value, _Undef, None]]


def eval_term(t: Term, lookup: Optional[Lookup] = None):
    """Evaluate a term to a Value or UNDEF.

    `lookup` resolves variable leaves; returning None (or being absent)
    makes the variable, and hence the whole term, undefined.
    """
    if isinstance(t, Lit):
        return t.value
    if isinstance(t, (PVar, SymVar, LVar)):
        if lookup is None:
            return UNDEF
        v = lookup(t)
        return UNDEF if v is None else v
    if isinstance(t, ListTerm):
        items = []
        for item in t.items:
            v = eval_term(item, lookup)
            if v is UNDEF:
                return UNDEF
            items.append(v)
        return VList(tuple(items))
    if isinstance(t, TypeTest):
        v = eval_term(t.arg, lookup)
        if v is UNDEF:
            return UNDEF
        return VBool(has_type(v, t.ty) == t.positive)
    if isinstance(t, UnOp):
        v = eval_term(t.arg, lookup)
        if v is UNDEF:
            return UNDEF
        if t.op == "not":
            return VBool(not v.b) if isinstance(v, VBool) else UNDEF
        if t.op == "len":
            return VNat(len(v.items)) if isinstance(v, VList) else UNDEF
        raise ValueError(f"unknown unary op {t.op}")
    if isinstance(t, BinOp):
        a = eval_term(t.left, lookup)
        if a is UNDEF:
            return UNDEF
        b = eval_term(t.right, lookup)
        if b is UNDEF:
            return UNDEF
        return _apply_binop(t.op, a, b)
    raise TypeError(f"not a term: {t!r}")


def _apply_binop(op: str, a: Value, b: Value):
    if op == "=":
        return VBool(a == b)
    if op == "!=":
        return VBool(a != b)
    if op == "::":
        if isinstance(b, VList):
            return VList((a,) + b.items)
        return UNDEF
    if op in ARITH:
        if not (isinstance(a, VNat) and isinstance(b, VNat)):
            return UNDEF
        if op == "+":
            return VNat(a.n + b.n)
        if op == "-":
            return VNat(a.n - b.n) if b.n <= a.n else UNDEF
        if op == "*":
            return VNat(a.n * b.n)
        return VNat(a.n // b.n) if b.n != 0 else UNDEF
    if op in COMPARISONS:
        if not (isinstance(a, VNat) and isinstance(b, VNat)):
            return UNDEF
        return VBool({"<": a.n < b.n, "<=": a.n <= b.n, ">": a.n > b.n, ">=": a.n >= b.n}[op])
    if op in BOOLOPS:
        if not (isinstance(a, VBool) and isinstance(b, VBool)):
            return UNDEF
        return VBool(a.b and b.b if op == "and" else a.b or b.b)
    raise ValueError(f"unknown binary op {op}")


def is_ground(t: Term) -> bool:
    if isinstance(t, Lit):
        return True
    if isinstance(t, (PVar, SymVar, LVar)):
        return False
    if isinstance(t, ListTerm):
        return all(is_ground(i) for i in t.items)
    if isinstance(t, TypeTest):
        return is_ground(t.arg)
    if isinstance(t, UnOp):
        return is_ground(t.arg)
    if isinstance(t, BinOp):
        return is_ground(t.left) and is_ground(t.right)
    raise TypeError(f"not a term: {t!r}")


def fold(t: Term) -> Term:
    """Constant-fold ground subterms; faulting ground terms are left intact."""
    if isinstance(t, (Lit, PVar, SymVar, LVar)):
        return t
    if isinstance(t, ListTerm):
        t = ListTerm(tuple(fold(i) for i in t.items))
    elif isinstance(t, TypeTest):
        t = TypeTest(fold(t.arg), t.ty, t.positive)
    elif isinstance(t, UnOp):
        t = UnOp(t.op, fold(t.arg))
    elif isinstance(t, BinOp):
        t = BinOp(t.op, fold(t.left), fold(t.right))
    if is_ground(t):
        v = eval_term(t, None)
        if v is not UNDEF:
            return Lit(v)
    return t


# ---------------------------------------------------------------------------
# Variable collection and substitution


def _leaves(t: Term) -> Iterator[Term]:
    stack = [t]
    while stack:
        u = stack.pop()
        if isinstance(u, (PVar, SymVar, LVar)):
            yield u
        elif isinstance(u, ListTerm):
            stack.extend(u.items)
        elif isinstance(u, TypeTest):
            stack.append(u.arg)
        elif isinstance(u, UnOp):
            stack.append(u.arg)
        elif isinstance(u, BinOp):
            stack.append(u.left)
            stack.append(u.right)


def sv(t: Term) -> set[str]:
    return {u.name for u in _leaves(t) if isinstance(u, SymVar)}


def pv(t: Term) -> set[str]:
    return {u.name for u in _leaves(t) if isinstance(u, PVar)}


def lv(t: Term) -> set[str]:
    return {u.name for u in _leaves(t) if isinstance(u, LVar)}


def subst(t: Term, mapping: dict[Term, Term]) -> Term:
    """Replace variable leaves per `mapping` (keys are leaf nodes)."""
    if isinstance(t, Lit):
        return t
    if isinstance(t, (PVar, SymVar, LVar)):
        return mapping.get(t, t)
    if isinstance(t, ListTerm):
        return ListTerm(tuple(subst(i, mapping) for i in t.items))
    if isinstance(t, TypeTest):
        return TypeTest(subst(t.arg, mapping), t.ty, t.positive)
    if isinstance(t, UnOp):
        return UnOp(t.op, subst(t.arg, mapping))
    if isinstance(t, BinOp):
        return BinOp(t.op, subst(t.left, mapping), subst(t.right, mapping))
    raise TypeError(f"not a term: {t!r}")


# ---------------------------------------------------------------------------
# Smart constructors

_NEG_CMP = {"<": ">=", "<=": ">", ">": "<=", ">=": "<", "=": "!=", "!=": "="}


def neg(t: Term) -> Term:
    """Negate, pushing through comparisons, equalities and type tests.

    Truth-oriented in the strict three-valued semantics: neg(t) is true
    exactly when t is false, and false exactly when t is true (faulting
    evaluations are never either).
    """
    t = fold(t)
    if t == TRUE_T:
        return FALSE_T
    if t == FALSE_T:
        return TRUE_T
    if isinstance(t, UnOp) and t.op == "not":
        return t.arg
    if isinstance(t, TypeTest):
        return TypeTest(t.arg, t.ty, not t.positive)
    if isinstance(t, BinOp) and t.op in _NEG_CMP:
        return BinOp(_NEG_CMP[t.op], t.left, t.right)
    # No De Morgan push: in the strict semantics it is only sound when the
    # operands are known boolean, which a bare term cannot promise.
    return UnOp("not", t)


def conj(ts: Iterable[Term]) -> Term:
    out: list[Term] = []
    for t in ts:
        t = fold(t)
        if t == FALSE_T:
            return FALSE_T
        if t != TRUE_T:
            out.append(t)
    if not out:
        return TRUE_T
    acc = out[0]
    for t in out[1:]:
        acc = BinOp("and", acc, t)
    return acc


def disj(ts: Iterable[Term]) -> Term:
    out: list[Term] = []
    for t in ts:
        t = fold(t)
        if t == TRUE_T:
            return TRUE_T
        if t != FALSE_T:
            out.append(t)
    if not out:
        return FALSE_T
    acc = out[0]
    for t in out[1:]:
        acc = BinOp("or", acc, t)
    return acc


def eq(a: Term, b: Term) -> Term:
    return fold(BinOp("=", a, b))


# ---------------------------------------------------------------------------
# Path conditions

_TRIVIAL = object()


@dataclass(frozen=True, slots=True)
class PC:
    """A path condition as an ordered tuple of conjuncts (all must be true)."""

    conjuncts: tuple[Term, ...] = ()

    @staticmethod
    def true() -> PC:
        return PC(())

    def and_raw(self, *facts: Term) -> PC:
        """Append folded facts, dropping literal-true ones; no solver involved."""
        out = list(self.conjuncts)
        for f in facts:
            f = fold(f)
            if f == TRUE_T:
                continue
            if isinstance(f, BinOp) and f.op == "and":
                out2 = []
                stack = [f]
                while stack:
                    g = stack.pop()
                    if isinstance(g, BinOp) and g.op == "and":
                        stack.append(g.right)
                        stack.append(g.left)
                    else:
                        out2.append(g)
                out.extend(out2)
            else:
                out.append(f)
        return PC(tuple(out))

    @property
    def is_literally_false(self) -> bool:
        return FALSE_T in self.conjuncts

    def term(self) -> Term:
        return conj(self.conjuncts)

    def sym_vars(self) -> set[str]:
        out: set[str] = set()
        for c in self.conjuncts:
            out |= sv(c)
        return out

    def __iter__(self) -> Iterator[Term]:
        return iter(self.conjuncts)

    def __repr__(self) -> str:
        if not self.conjuncts:
            return "true"
        return " /\\ ".join(pretty(c) for c in self.conjuncts)


# ---------------------------------------------------------------------------
# Printing

# All comparisons share one (non-associative) level, matching the parser.
_PREC = {
    "or": 1,
    "and": 2,
    "=": 3,
    "!=": 3,
    "<": 3,
    "<=": 3,
    ">": 3,
    ">=": 3,
    "::": 5,
    "+": 6,
    "-": 6,
    "*": 7,
    "/": 7,
}


def pretty(t: Term, prec: int = 0) -> str:
    if isinstance(t, Lit):
        return repr(t.value)
    if isinstance(t, PVar):
        return t.name
    if isinstance(t, SymVar):
        return "$" + t.name
    if isinstance(t, LVar):
        return "#" + t.name
    if isinstance(t, ListTerm):
        return "[" + ", ".join(pretty(i) for i in t.items) + "]"
    if isinstance(t, TypeTest):
        s = f"{pretty(t.arg, 8)} {'in' if t.positive else 'notin'} {t.ty}"
        return f"({s})" if prec > 0 else s
    if isinstance(t, UnOp):
        if t.op == "len":
            return f"len({pretty(t.arg)})"
        return f"not {pretty(t.arg, 8)}"
    if isinstance(t, BinOp):
        p = _PREC[t.op]
        if t.op in ("=", "!=", "<", "<=", ">", ">="):  # non-associative
            lp, rp = p + 1, p + 1
        elif t.op == "::":  # right-associative
            lp, rp = p + 1, p
        else:  # left-associative
            lp, rp = p, p + 1
        s = f"{pretty(t.left, lp)} {t.op} {pretty(t.right, rp)}"
        return f"({s})" if prec > p else s
    raise TypeError(f"not a term: {t!r}")
