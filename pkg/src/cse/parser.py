"""Parser for the program/spec file format.

One file holds function implementations, `pred` blocks, `spec` blocks, and an
optional `main { ... }` command. Inside assertions, bare identifiers are
logical variables except `ret`/`err` (the call/fault output variables); `*`
is the separating conjunction there, so multiplication inside an assertion
must be parenthesised.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from . import speclang as sl
from . import syntax as sx
from .terms import (
    VList,
    FALSE,
    NIL,
    TRUE,
    BinOp,
    ListTerm,
    Lit,
    LVar,
    PVar,
    Term,
    TypeTest,
    UnOp,
    VNat,
    VStr,
    fold,
)


class CseParseError(Exception):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {msg}")
        self.line = line
        self.col = col


_PUNCT = [
    "\\/",
    "::",
    ":=",
    "->",
    "=>",
    "!=",
    "<=",
    ">=",
    "(",
    ")",
    "[",
    "]",
    "{",
    "}",
    ",",
    ";",
    ".",
    ":",
    "=",
    "<",
    ">",
    "+",
    "-",
    "*",
    "/",
]

_KEYWORDS = {
    "skip", "nondet", "sym", "new", "free", "error", "if", "else", "assume",
    "assert", "fold", "unfold", "func", "pred", "spec", "main", "return",
    "exists", "emp", "freed", "true", "false", "nil", "not", "len", "in",
    "notin", "and", "or", "as", "exact", "requires", "ensures", "False",
}

_TYPES = {"Nat", "Bool", "Str", "List", "Val"}


@dataclass
class Tok:
    kind: str  # "ident" | "nat" | "string" | "punct" | "eof"
    value: str
    line: int
    col: int


def _tokenize(text: str) -> list[Tok]:
    toks: list[Tok] = []
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            i, line, col = i + 1, line + 1, 1
            continue
        if ch in " \t\r":
            i, col = i + 1, col + 1
            continue
        if text.startswith("//", i):
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch == '"':
            j, buf = i + 1, []
            while j < n and text[j] != '"':
                if text[j] == "\\" and j + 1 < n and text[j + 1] in '"\\':
                    buf.append(text[j + 1])
                    j += 2
                else:
                    buf.append(text[j])
                    j += 1
            if j >= n:
                raise CseParseError("unterminated string", line, col)
            toks.append(Tok("string", "".join(buf), line, col))
            col += j + 1 - i
            i = j + 1
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            toks.append(Tok("nat", text[i:j], line, col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] in "_'"):
                j += 1
            toks.append(Tok("ident", text[i:j], line, col))
            col += j - i
            i = j
            continue
        for p in _PUNCT:
            if text.startswith(p, i):
                toks.append(Tok("punct", p, line, col))
                i += len(p)
                col += len(p)
                break
        else:
            raise CseParseError(f"unexpected character {ch!r}", line, col)
    toks.append(Tok("eof", "", line, col))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.pos = 0

    # -- token helpers

    def peek(self, k: int = 0) -> Tok:
        return self.toks[min(self.pos + k, len(self.toks) - 1)]

    def at_punct(self, p: str) -> bool:
        t = self.peek()
        return t.kind == "punct" and t.value == p

    def at_word(self, w: str) -> bool:
        t = self.peek()
        return t.kind == "ident" and t.value == w

    def take(self) -> Tok:
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def expect_punct(self, p: str) -> Tok:
        if not self.at_punct(p):
            t = self.peek()
            raise CseParseError(f"expected {p!r}, found {t.value!r}", t.line, t.col)
        return self.take()

    def expect_word(self, w: str) -> Tok:
        if not self.at_word(w):
            t = self.peek()
            raise CseParseError(f"expected {w!r}, found {t.value!r}", t.line, t.col)
        return self.take()

    def ident(self, what: str = "identifier") -> str:
        t = self.peek()
        if t.kind != "ident" or t.value in _KEYWORDS:
            raise CseParseError(f"expected {what}, found {t.value!r}", t.line, t.col)
        return self.take().value

    def err(self, msg: str) -> CseParseError:
        t = self.peek()
        return CseParseError(msg, t.line, t.col)

    # -- programs

    def program(self) -> sx.Program:
        functions: dict[str, sx.FunctionDef] = {}
        predicates: dict[str, sl.Predicate] = {}
        specs: dict[str, list[sl.Spec]] = {}
        main: Optional[sx.Cmd] = None
        while not self.peek().kind == "eof":
            if self.at_word("func"):
                f = self.func()
                if f.name in functions:
                    raise self.err(f"duplicate function {f.name!r}")
                functions[f.name] = f
            elif self.at_word("pred"):
                p = self.pred()
                if p.name in predicates:
                    raise self.err(f"duplicate predicate {p.name!r}")
                predicates[p.name] = p
            elif self.at_word("spec"):
                s = self.spec()
                specs.setdefault(s.fname, []).append(s)
            elif self.at_word("main"):
                if main is not None:
                    raise self.err("duplicate main block")
                self.take()
                self.expect_punct("{")
                main = self.cmds()
                self.expect_punct("}")
            else:
                raise self.err("expected func, pred, spec, or main")
        return sx.Program(functions, predicates, specs, main)

    def func(self) -> sx.FunctionDef:
        self.expect_word("func")
        t = self.peek()
        name = self.ident("function name")
        self.expect_punct("(")
        params: list[str] = []
        while not self.at_punct(")"):
            if params:
                self.expect_punct(",")
            p = self.ident("parameter")
            if p in params:
                raise CseParseError(f"duplicate parameter {p!r}", t.line, t.col)
            params.append(p)
        self.take()
        self.expect_punct("{")
        body: Optional[sx.Cmd] = None
        while not self.at_word("return"):
            c = self.cmd()
            body = c if body is None else sx.Seq(body, c)
            self.expect_punct(";")
        self.take()
        ret = self.expr()
        self.expect_punct("}")
        return sx.FunctionDef(name, tuple(params), body or sx.Skip(), ret)

    # -- commands

    def cmds(self) -> sx.Cmd:
        c = self.cmd()
        while self.at_punct(";"):
            self.take()
            c = sx.Seq(c, self.cmd())
        return c

    def _target(self) -> str:
        t = self.peek()
        x = self.ident("variable")
        if x in sx.RESERVED:
            raise CseParseError(f"{x!r} may not be assigned", t.line, t.col)
        return x

    def cmd(self) -> sx.Cmd:
        if self.at_word("skip"):
            self.take()
            return sx.Skip()
        if self.at_word("error"):
            self.take()
            self.expect_punct("(")
            e = self.expr()
            self.expect_punct(")")
            return sx.Error(e)
        if self.at_word("free"):
            self.take()
            self.expect_punct("(")
            e = self.expr()
            self.expect_punct(")")
            return sx.Free(e)
        if self.at_word("assume") or self.at_word("assert"):
            w = self.take().value
            self.expect_punct("(")
            e = self.expr()
            self.expect_punct(")")
            return sx.Assume(e) if w == "assume" else sx.Assert(e)
        if self.at_word("if"):
            self.take()
            self.expect_punct("(")
            cond = self.expr()
            self.expect_punct(")")
            self.expect_punct("{")
            then = self.cmds()
            self.expect_punct("}")
            self.expect_word("else")
            self.expect_punct("{")
            els = self.cmds()
            self.expect_punct("}")
            return sx.IfElse(cond, then, els)
        if self.at_word("fold") or self.at_word("unfold"):
            w = self.take().value
            name = self.ident("predicate name")
            self.expect_punct("(")
            args = self.exprlist(")")
            self.take()
            cls = sx.Fold if w == "fold" else sx.Unfold
            return cls(name, tuple(args))
        if self.at_punct("["):
            self.take()
            addr = self.expr()
            self.expect_punct("]")
            self.expect_punct(":=")
            return sx.Mutate(addr, self.expr())
        # assignment forms
        x = self._target()
        self.expect_punct(":=")
        if self.at_word("nondet"):
            self.take()
            return sx.Nondet(x)
        if self.at_word("sym"):
            self.take()
            return sx.Sym(x)
        if self.at_word("new"):
            self.take()
            self.expect_punct("(")
            t = self.peek()
            if t.kind != "nat":
                raise CseParseError("new takes a literal size", t.line, t.col)
            self.take()
            self.expect_punct(")")
            return sx.New(x, int(t.value))
        if self.at_punct("["):
            # "x := [E]" is a lookup; empty or multi-element brackets are
            # list literals (a singleton list rhs must be parenthesised).
            if self.peek(1).kind == "punct" and self.peek(1).value == "]":
                self.take()
                self.take()
                return sx.Assign(x, Lit(VList(())))
            save = self.pos
            self.take()
            addr = self.expr()
            if self.at_punct(","):
                self.pos = save
                return sx.Assign(x, self.expr())
            self.expect_punct("]")
            return sx.Lookup(x, addr)
        if self.peek().kind == "ident" and self.peek().value not in _KEYWORDS:
            nxt = self.peek(1)
            if nxt.kind == "punct" and nxt.value == "(":
                fname = self.take().value
                self.take()
                args = self.exprlist(")")
                self.take()
                return sx.FCall(x, fname, tuple(args))
        return sx.Assign(x, self.expr())

    def exprlist(self, closer: str, logical: bool = False) -> list[Term]:
        out: list[Term] = []
        while not self.at_punct(closer) and not self.at_punct(";"):
            if out:
                self.expect_punct(",")
            out.append(self.expr(logical=logical, no_mult=logical))
        return out

    # -- expressions

    def expr(self, logical: bool = False, no_mult: bool = False) -> Term:
        # No folding here: parsing preserves source structure exactly.
        return self._or(logical, no_mult)

    def _or(self, lg: bool, nm: bool) -> Term:
        t = self._and(lg, nm)
        while self.at_word("or"):
            self.take()
            t = BinOp("or", t, self._and(lg, nm))
        return t

    def _and(self, lg: bool, nm: bool) -> Term:
        t = self._cmp(lg, nm)
        while self.at_word("and"):
            self.take()
            t = BinOp("and", t, self._cmp(lg, nm))
        return t

    def _cmp(self, lg: bool, nm: bool) -> Term:
        t = self._cons(lg, nm)
        if self.at_word("in") or self.at_word("notin"):
            positive = self.take().value == "in"
            tok = self.peek()
            if tok.kind != "ident" or tok.value not in _TYPES:
                raise CseParseError("expected a type name", tok.line, tok.col)
            self.take()
            return TypeTest(t, tok.value, positive)
        for op in ("=", "!=", "<=", "<", ">=", ">"):
            if self.at_punct(op):
                self.take()
                return BinOp(op, t, self._cons(lg, nm))
        return t

    def _cons(self, lg: bool, nm: bool) -> Term:
        t = self._add(lg, nm)
        if self.at_punct("::"):
            self.take()
            return BinOp("::", t, self._cons(lg, nm))
        return t

    def _add(self, lg: bool, nm: bool) -> Term:
        t = self._mul(lg, nm)
        while self.at_punct("+") or self.at_punct("-"):
            op = self.take().value
            t = BinOp(op, t, self._mul(lg, nm))
        return t

    def _mul(self, lg: bool, nm: bool) -> Term:
        t = self._unary(lg, nm)
        while self.at_punct("/") or (self.at_punct("*") and not nm):
            op = self.take().value
            t = BinOp(op, t, self._unary(lg, nm))
        return t

    def _unary(self, lg: bool, nm: bool) -> Term:
        if self.at_word("not"):
            self.take()
            return UnOp("not", self._unary(lg, nm))
        if self.at_word("len"):
            self.take()
            self.expect_punct("(")
            e = self.expr(lg)
            self.expect_punct(")")
            return UnOp("len", e)
        return self._atom(lg, nm)

    def _atom(self, lg: bool, nm: bool) -> Term:
        t = self.peek()
        if t.kind == "nat":
            self.take()
            return Lit(VNat(int(t.value)))
        if t.kind == "string":
            self.take()
            return Lit(VStr(t.value))
        if self.at_word("true"):
            self.take()
            return Lit(TRUE)
        if self.at_word("false"):
            self.take()
            return Lit(FALSE)
        if self.at_word("nil"):
            self.take()
            return Lit(NIL)
        if self.at_punct("["):
            self.take()
            items = self.exprlist("]", logical=lg)
            self.take()
            if all(isinstance(i, Lit) for i in items):  # canonical ground lists
                return Lit(VList(tuple(i.value for i in items)))
            return ListTerm(tuple(items))
        if self.at_punct("("):
            self.take()
            e = self.expr(lg)  # multiplication is re-enabled inside parens
            self.expect_punct(")")
            return e
        if t.kind == "ident" and t.value not in _KEYWORDS:
            self.take()
            if lg:
                return PVar(t.value) if t.value in sx.RESERVED else LVar(t.value)
            return PVar(t.value)
        raise CseParseError(f"expected an expression, found {t.value!r}", t.line, t.col)

    # -- assertions

    def assertion(self) -> sl.Assertion:
        a = self._star_assertion()
        while self.at_punct("\\/"):
            self.take()
            a = sl.AOr(a, self._star_assertion())
        return a

    def _star_assertion(self) -> sl.Assertion:
        parts = [self.aatom()]
        while self.at_punct("*"):
            self.take()
            parts.append(self.aatom())
        return sl.star(parts) if len(parts) > 1 else parts[0]

    def aatom(self) -> sl.Assertion:
        if self.at_word("emp"):
            self.take()
            return sl.Emp()
        if self.at_word("False"):
            self.take()
            return sl.AFalse()
        t = self.peek()
        if (
            t.kind == "ident"
            and t.value not in _KEYWORDS
            and t.value not in sx.RESERVED
            and self.peek(1).kind == "punct"
            and self.peek(1).value == "("
        ):
            name = self.take().value
            self.take()
            ins = self.exprlist(";", logical=True)
            self.expect_punct(";")
            outs = self.exprlist(")", logical=True)
            self.expect_punct(")")
            return sl.PredAssert(name, tuple(ins), tuple(outs))
        e = self.expr(logical=True, no_mult=True)
        if self.at_punct("->"):
            self.take()
            if self.at_word("freed"):
                self.take()
                return sl.CellFreed(e)
            contents = [self.expr(logical=True, no_mult=True)]
            while self.at_punct(","):
                self.take()
                contents.append(self.expr(logical=True, no_mult=True))
            cells = [sl.Cell(e, contents[0])]
            for k, c in enumerate(contents[1:], start=1):
                cells.append(sl.Cell(fold(BinOp("+", e, Lit(VNat(k)))), c))
            return sl.star(cells) if len(cells) > 1 else cells[0]
        return sl.Pure(e)

    def _maybe_exists(self) -> sl.Assertion:
        if self.at_word("exists"):
            self.take()
            names = [self.ident("bound variable")]
            while self.at_punct(","):
                self.take()
                names.append(self.ident("bound variable"))
            self.expect_punct(".")
            return sl.Exists(tuple(names), self.assertion())
        return self.assertion()

    # -- predicates and specs

    def pred(self) -> sl.Predicate:
        self.expect_word("pred")
        name = self.ident("predicate name")
        self.expect_punct("(")
        ins = []
        while not self.at_punct(";"):
            if ins:
                self.expect_punct(",")
            ins.append(self.ident("in-parameter"))
        self.take()
        outs = []
        while not self.at_punct(")"):
            if outs:
                self.expect_punct(",")
            outs.append(self.ident("out-parameter"))
        self.take()
        exact = False
        if self.at_punct("["):
            self.take()
            self.expect_word("exact")
            self.expect_punct("]")
            exact = True
        self.expect_punct("{")
        disjuncts = []
        while True:
            a = self._maybe_exists()
            if isinstance(a, sl.Exists):
                binders, body = a.names, a.body
            else:
                binders, body = (), a
            disjuncts.append((binders, tuple(sl.star_list(body))))
            if self.at_punct(";"):
                self.take()
                continue
            break
        self.expect_punct("}")
        return sl.Predicate(name, tuple(ins), tuple(outs), tuple(disjuncts), exact)

    def spec(self) -> sl.Spec:
        self.expect_word("spec")
        fname = self.ident("function name")
        self.expect_punct("(")
        params = []
        while not self.at_punct(")"):
            if params:
                self.expect_punct(",")
            params.append(self.ident("parameter"))
        self.take()
        self.expect_punct("[")
        t = self.peek()
        if t.kind != "ident" or t.value not in ("ox", "ux"):
            raise CseParseError("expected mode ox or ux", t.line, t.col)
        mode = self.take().value
        self.expect_punct("]")
        label = ""
        if self.at_word("as"):
            self.take()
            label = self.ident("spec label")
        self.expect_punct("{")
        pre: sl.Assertion = sl.Emp()
        ok_post: Optional[sl.Assertion] = None
        err_post: Optional[sl.Assertion] = None
        while not self.at_punct("}"):
            if self.at_word("requires"):
                self.take()
                self.expect_punct(":")
                pre = self.assertion()
            elif self.at_word("ensures"):
                self.take()
                which = self.peek()
                if which.kind != "ident" or which.value not in ("ok", "err"):
                    raise CseParseError("expected ok or err", which.line, which.col)
                self.take()
                self.expect_punct(":")
                post = self._maybe_exists()
                if which.value == "ok":
                    ok_post = post
                else:
                    err_post = post
            else:
                raise self.err("expected requires or ensures")
        self.take()
        return sl.Spec(mode, fname, tuple(params), pre, ok_post, err_post, label)


def parse_program(text: str) -> sx.Program:
    return _Parser(text).program()


def parse_command(text: str) -> sx.Cmd:
    p = _Parser(text)
    c = p.cmds()
    t = p.peek()
    if t.kind != "eof":
        raise CseParseError(f"trailing input {t.value!r}", t.line, t.col)
    return c


def parse_expression(text: str) -> Term:
    p = _Parser(text)
    e = p.expr()
    t = p.peek()
    if t.kind != "eof":
        raise CseParseError(f"trailing input {t.value!r}", t.line, t.col)
    return e


def parse_assertion(text: str) -> sl.Assertion:
    p = _Parser(text)
    a = p._maybe_exists()
    t = p.peek()
    if t.kind != "eof":
        raise CseParseError(f"trailing input {t.value!r}", t.line, t.col)
    return a


# ---------------------------------------------------------------------------
# Program printing (the inverse of parse_program)


def print_program(prog: sx.Program) -> str:
    out: list[str] = []
    for p in prog.predicates.values():
        ins, outs = ", ".join(p.ins), ", ".join(p.outs)
        tag = " [exact]" if p.strictly_exact else ""
        out.append(f"pred {p.name}({ins}; {outs}){tag} {{")
        lines = []
        for binders, parts in p.disjuncts:
            body = sl.print_assertion(sl.star(parts) if len(parts) != 1 else parts[0])
            lines.append(("  exists " + ", ".join(binders) + ". " if binders else "  ") + body)
        out.append(";\n".join(lines))
        out.append("}")
    for specs in prog.specs.values():
        for s in specs:
            label = f" as {s.name}" if s.name else ""
            out.append(f"spec {s.fname}({', '.join(s.params)}) [{s.mode}]{label} {{")
            out.append(f"  requires: {sl.print_assertion(s.pre)}")
            if s.ok_post is not None:
                out.append(f"  ensures ok: {sl.print_assertion(s.ok_post)}")
            if s.err_post is not None:
                out.append(f"  ensures err: {sl.print_assertion(s.err_post)}")
            out.append("}")
    for f in prog.functions.values():
        out.append(f"func {f.name}({', '.join(f.params)}) {{")
        body = sx.print_cmd(f.body, "  ")
        out.append(body + ";")
        out.append(f"  return {sx.pretty_expr(f.ret)}")
        out.append("}")
    if prog.main is not None:
        out.append("main {")
        out.append(sx.print_cmd(prog.main, "  "))
        out.append("}")
    return "\n".join(out) + "\n"
