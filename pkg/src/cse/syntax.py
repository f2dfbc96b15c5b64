"""Command syntax, function definitions, programs, and variable analyses."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .terms import Term, pv as term_pv, pretty

pretty_expr = pretty

# `ret` and `err` are outputs of calls and faults; user code may not assign them.
RESERVED = ("ret", "err")


class Cmd:
    __slots__ = ()

    def __repr__(self) -> str:
        return print_cmd(self)


@dataclass(frozen=True, slots=True, repr=False)
class Skip(Cmd):
    pass


@dataclass(frozen=True, slots=True, repr=False)
class Assign(Cmd):
    var: str
    expr: Term


@dataclass(frozen=True, slots=True, repr=False)
class Nondet(Cmd):
    var: str


@dataclass(frozen=True, slots=True, repr=False)
class Error(Cmd):
    expr: Term


@dataclass(frozen=True, slots=True, repr=False)
class Lookup(Cmd):
    var: str
    addr: Term


@dataclass(frozen=True, slots=True, repr=False)
class Mutate(Cmd):
    addr: Term
    expr: Term


@dataclass(frozen=True, slots=True, repr=False)
class New(Cmd):
    var: str
    size: int  # literal natural, per the allocation rules


@dataclass(frozen=True, slots=True, repr=False)
class Free(Cmd):
    addr: Term


@dataclass(frozen=True, slots=True, repr=False)
class Seq(Cmd):
    first: Cmd
    second: Cmd


@dataclass(frozen=True, slots=True, repr=False)
class IfElse(Cmd):
    cond: Term
    then: Cmd
    els: Cmd


@dataclass(frozen=True, slots=True, repr=False)
class FCall(Cmd):
    var: str
    fname: str
    args: tuple[Term, ...]


@dataclass(frozen=True, slots=True, repr=False)
class Fold(Cmd):
    pred: str
    args: tuple[Term, ...]


@dataclass(frozen=True, slots=True, repr=False)
class Unfold(Cmd):
    pred: str
    args: tuple[Term, ...]


@dataclass(frozen=True, slots=True, repr=False)
class Sym(Cmd):
    var: str


@dataclass(frozen=True, slots=True, repr=False)
class Assume(Cmd):
    expr: Term


@dataclass(frozen=True, slots=True, repr=False)
class Assert(Cmd):
    expr: Term


@dataclass(frozen=True, slots=True)
class FunctionDef:
    name: str
    params: tuple[str, ...]
    body: Cmd
    ret: Term

    def __post_init__(self) -> None:
        if len(set(self.params)) != len(self.params):
            raise ValueError(f"duplicate parameter in {self.name}")
        if not term_pv(self.ret) <= set(self.params) | pv_cmd(self.body):
            raise ValueError(f"return expression of {self.name} uses unknown variables")

    def locals(self) -> tuple[str, ...]:
        return tuple(sorted(pv_cmd(self.body) - set(self.params)))


ImplContext = dict[str, FunctionDef]


@dataclass(frozen=True, slots=True)
class Program:
    """A parsed program file: functions, predicates, specs, optional main."""

    functions: dict[str, FunctionDef] = field(default_factory=dict)
    predicates: dict = field(default_factory=dict)  # name -> speclang.Predicate
    specs: dict = field(default_factory=dict)  # name -> list[speclang.Spec]
    main: Optional[Cmd] = None


# ---------------------------------------------------------------------------
# Variable analyses


def pv_cmd(c: Cmd) -> set[str]:
    """All program variables occurring in a command."""
    if isinstance(c, Skip):
        return set()
    if isinstance(c, Assign):
        return {c.var} | term_pv(c.expr)
    if isinstance(c, (Nondet, Sym, New)):
        return {c.var}
    if isinstance(c, (Error, Assume, Assert)):
        return term_pv(c.expr)
    if isinstance(c, Lookup):
        return {c.var} | term_pv(c.addr)
    if isinstance(c, Mutate):
        return term_pv(c.addr) | term_pv(c.expr)
    if isinstance(c, Free):
        return term_pv(c.addr)
    if isinstance(c, Seq):
        return pv_cmd(c.first) | pv_cmd(c.second)
    if isinstance(c, IfElse):
        return term_pv(c.cond) | pv_cmd(c.then) | pv_cmd(c.els)
    if isinstance(c, FCall):
        return {c.var}.union(*(term_pv(a) for a in c.args))
    if isinstance(c, (Fold, Unfold)):
        out: set[str] = set()
        for a in c.args:
            out |= term_pv(a)
        return out
    raise TypeError(f"not a command: {c!r}")


def mod_cmd(c: Cmd) -> set[str]:
    """Variables a command may assign; excludes the implicit err write on faults."""
    if isinstance(c, (Assign, Nondet, Sym, New, Lookup, FCall)):
        return {c.var}
    if isinstance(c, Seq):
        return mod_cmd(c.first) | mod_cmd(c.second)
    if isinstance(c, IfElse):
        return mod_cmd(c.then) | mod_cmd(c.els)
    return set()


def var_sets(c: Cmd) -> tuple[set[str], set[str]]:
    return pv_cmd(c), mod_cmd(c)


# ---------------------------------------------------------------------------
# Printing (the inverse of the parser)


def _block(c: Cmd, indent: str) -> str:
    inner = print_cmd(c, indent + "  ")
    return "{\n" + inner + "\n" + indent + "}"


def print_cmd(c: Cmd, indent: str = "") -> str:
    if isinstance(c, Seq):
        return print_cmd(c.first, indent) + ";\n" + print_cmd(c.second, indent)
    if isinstance(c, Skip):
        return indent + "skip"
    if isinstance(c, Assign):
        rhs = pretty(c.expr)
        if rhs.startswith("["):  # avoid the lookup reading of a list rhs
            rhs = f"({rhs})"
        return indent + f"{c.var} := {rhs}"
    if isinstance(c, Nondet):
        return indent + f"{c.var} := nondet"
    if isinstance(c, Sym):
        return indent + f"{c.var} := sym"
    if isinstance(c, Error):
        return indent + f"error({pretty(c.expr)})"
    if isinstance(c, Lookup):
        return indent + f"{c.var} := [{pretty(c.addr)}]"
    if isinstance(c, Mutate):
        return indent + f"[{pretty(c.addr)}] := {pretty(c.expr)}"
    if isinstance(c, New):
        return indent + f"{c.var} := new({c.size})"
    if isinstance(c, Free):
        return indent + f"free({pretty(c.addr)})"
    if isinstance(c, IfElse):
        return (
            indent
            + f"if ({pretty(c.cond)}) "
            + _block(c.then, indent)
            + " else "
            + _block(c.els, indent)
        )
    if isinstance(c, FCall):
        return indent + f"{c.var} := {c.fname}({', '.join(pretty(a) for a in c.args)})"
    if isinstance(c, Fold):
        return indent + f"fold {c.pred}({', '.join(pretty(a) for a in c.args)})"
    if isinstance(c, Unfold):
        return indent + f"unfold {c.pred}({', '.join(pretty(a) for a in c.args)})"
    if isinstance(c, Assume):
        return indent + f"assume({pretty(c.expr)})"
    if isinstance(c, Assert):
        return indent + f"assert({pretty(c.expr)})"
    raise TypeError(f"not a command: {c!r}")
