"""The three analyses: whole-program symbolic testing, OX verification, and
UX specification synthesis via bi-abduction."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from . import consprod as cp
from . import speclang as sl
from . import syntax as sx
from .biabduction import AntiFrame, BiabEngine, BiabStats
from .concrete import Outcome
from .engine import Engine, EngineConfig, Mode, RunStats
from .solver import SatResult, Solver, adaptive_domain, enumerate_models
from .symstate import FreshNames, SymState
from .terms import (
    NIL_T,
    ListTerm,
    Lit,
    LVar,
    PVar,
    SymVar,
    Term,
    VStr,
    pretty,
)


def _tag_of(err: Optional[Term]) -> Optional[str]:
    if isinstance(err, Lit):
        v = err.value
        if hasattr(v, "items") and v.items and isinstance(v.items[0], VStr):
            return v.items[0].s
        return None
    if isinstance(err, ListTerm) and err.items and isinstance(err.items[0], Lit):
        v = err.items[0].value
        if isinstance(v, VStr):
            return v.s
    return None


def _err_elem(err: Term, i: int) -> Term:
    if isinstance(err, Lit):
        return Lit(err.value.items[i])
    return err.items[i]


# ---------------------------------------------------------------------------
# Whole-program symbolic testing (EX core)


@dataclass(frozen=True)
class Violation:
    expr: str
    pc: str
    witness: Optional[dict]


@dataclass
class SymTestReport:
    violations: list[Violation]
    leaves: int
    coverage_incomplete: bool

    @property
    def ok(self) -> bool:
        return not self.violations and not self.coverage_incomplete


def start_state(cmd: sx.Cmd) -> SymState:
    return SymState.make({x: NIL_T for x in sorted(sx.pv_cmd(cmd))})


def symtest(program: sx.Program, cfg: Optional[EngineConfig] = None, solver=None) -> SymTestReport:
    """Run main to completion in the core engine and report assert failures."""
    if program.main is None:
        raise ValueError("program has no main block")
    cfg = cfg or EngineConfig()
    cfg.mode = Mode.EX
    eng = Engine(cfg, impl_ctx=program.functions, predicates=program.predicates, solver=solver)
    leaves = eng.collect(start_state(program.main), program.main)
    violations = []
    for o, st in leaves:
        err = st.store_get("err")
        if o is Outcome.ERR and _tag_of(err) == "Assert":
            model = eng.solver.model(st.pc)
            witness = {k: repr(v) for k, v in model.items()} if model else None
            violations.append(Violation(pretty(_err_elem(err, 1)), repr(st.pc), witness))
    return SymTestReport(violations, len(leaves), eng.stats.coverage_incomplete)


# ---------------------------------------------------------------------------
# OX verification


@dataclass
class VerifyResult:
    verified: bool
    reason: str = ""
    failing_leaf: Optional[str] = None

    def __bool__(self) -> bool:
        return self.verified


def _spec_start(
    spec: sl.Spec, f: sx.FunctionDef, fresh: FreshNames
) -> tuple[dict[str, Term], SymState]:
    """Step 1 of verifyOX/synthesise: one fresh symbolic variable per logical
    variable of the pre, parameters bound to theirs, locals to nil."""
    lvars = sorted(sl.lv(spec.full_pre()) | set(spec.params))
    theta: dict[str, Term] = {x: fresh.fresh_var(x) for x in lvars}
    store = {x: theta[x] for x in f.params}
    for z in f.locals():
        store[z] = NIL_T
    return theta, SymState.make(store)


def _body_with_ret(f: sx.FunctionDef) -> sx.Cmd:
    return sx.Seq(f.body, sx.Assign("ret", f.ret))


def verify_ox(
    spec_ctx: sl.SpecContext,
    f: sx.FunctionDef,
    spec: sl.Spec,
    cfg: Optional[EngineConfig] = None,
    predicates: Optional[sl.PredTable] = None,
    solver: Optional[Solver] = None,
) -> VerifyResult:
    """Check an OX specification against the implementation: produce the pre,
    run to completion, consume each leaf's post exactly, require an empty
    residual heap and predicate multiset."""
    if spec.mode != "ox":
        raise ValueError("verify_ox takes an OX specification")
    if f.name in spec_ctx:
        raise ValueError(f"{f.name} must not already be in the specification context")
    cfg = cfg or EngineConfig()
    cfg.mode = Mode.OX
    fresh = FreshNames()
    eng = Engine(cfg, spec_ctx, {}, predicates, solver, fresh)
    theta, st0 = _spec_start(spec, f, fresh)

    starts = cp.produce(eng.solver, spec.pre, theta, st0, eng.stats)
    if not starts:
        return VerifyResult(False, "pre-condition is unsatisfiable")
    for start in starts:
        leaves = eng.collect(start, _body_with_ret(f))
        if eng.stats.coverage_incomplete:
            return VerifyResult(False, "branch limit hit; coverage incomplete")
        for o, leaf in leaves:
            if o in (Outcome.MISS, Outcome.ABORT):
                return VerifyResult(
                    False, f"execution can fault with {o.value}", repr(leaf)
                )
            which = "ok" if o is Outcome.OK else "err"
            post = spec.post(which)
            if post is None:
                return VerifyResult(
                    False, f"{which} outcome reached but spec has no {which}-post", repr(leaf)
                )
            body = post
            if isinstance(post, sl.Exists):
                body = post.body
            outvar = "ret" if which == "ok" else "err"
            out_term = leaf.store_get(outvar)
            if out_term is None:
                return VerifyResult(False, f"leaf has no {outvar} value", repr(leaf))
            # A disjunctive post passes if some disjunct consumes exactly
            # (all models of the leaf then satisfy that disjunct).
            reason = "post-condition consumption failed"
            consumed = False
            for disjunct in _disjuncts(body):
                r = fresh.fresh(f"{outvar}_post")
                theta2 = dict(theta)
                theta2[r] = out_term
                body2 = sl.subst_assertion(disjunct, {PVar(outvar): LVar(r)})
                try:
                    results = cp.consume(
                        eng.solver, Mode.OX, body2, theta2, leaf, eng.stats, cfg.invert_mul
                    )
                except cp.mp.PlanFailure as e:
                    reason = f"post-condition not plannable: {e}"
                    continue
                if not results or any(isinstance(res, cp.ConsumeAbort) for res in results):
                    reason = "post-condition consumption aborted"
                    continue
                if any(res.frame.heap.cells or res.frame.preds for res in results):
                    reason = "residual resource after consuming the post"
                    continue
                consumed = True
                break
            if not consumed:
                return VerifyResult(False, reason, repr(leaf))
    return VerifyResult(True)


def _disjuncts(p: sl.Assertion) -> list[sl.Assertion]:
    if isinstance(p, sl.AOr):
        return _disjuncts(p.left) + _disjuncts(p.right)
    return [p]


# ---------------------------------------------------------------------------
# UX specification synthesis


@dataclass
class SynthesisedSpec:
    spec: sl.Spec
    anti_frame: AntiFrame
    outcome: str  # "ok" | "err"
    manifest_candidate: bool = False


@dataclass
class SynthReport:
    fname: str
    specs: list[SynthesisedSpec] = field(default_factory=list)
    leaves: int = 0


def synthesise(
    spec_ctx: sl.SpecContext,
    f: sx.FunctionDef,
    pre: sl.Assertion,
    cfg: Optional[EngineConfig] = None,
    predicates: Optional[sl.PredTable] = None,
    solver: Optional[Solver] = None,
    impl_ctx: Optional[sx.ImplContext] = None,
    coalesce: bool = False,
) -> SynthReport:
    """Bi-abduce one UX specification per execution path of f from the
    candidate pre-condition (emp is always a valid start)."""
    if isinstance(pre, sl.Exists) or sl.pv(pre):
        raise ValueError("candidate pre must be existential- and program-variable-free")
    cfg = cfg or EngineConfig()
    cfg.mode = Mode.UX
    fresh = FreshNames()
    eng = Engine(cfg, spec_ctx, impl_ctx or {}, predicates, solver, fresh)
    bb = BiabEngine(eng, cfg.max_fixes_per_cmd)
    candidate = sl.Spec("ux", f.name, tuple(f.params), pre)
    theta, st0 = _spec_start(candidate, f, fresh)

    report = SynthReport(f.name)
    starts = cp.produce(eng.solver, pre, theta, st0, eng.stats)
    pre_lv = sl.lv(pre) | set(f.params)
    for start in starts:
        for o, leaf, af in bb.run(start, _body_with_ret(f)):
            report.leaves += 1
            if not bb.engine.finalize_ux((o, leaf)):
                continue
            which = "ok" if o is Outcome.OK else "err"
            af_assertion = (
                None if af.is_empty() else sl.to_assertion(af.as_state())
            )
            full_pre = sl.star([pre] + ([af_assertion] if af_assertion else []))
            outvar = "ret" if which == "ok" else "err"
            out_term = leaf.store_get(outvar)
            restricted = leaf.with_store({outvar: out_term} if out_term is not None else {})
            post = sl.to_assertion(restricted)
            bound = sorted(sl.lv(post) - sl.lv(full_pre) - pre_lv)
            closed = sl.Exists(tuple(bound), post) if bound else post
            s = sl.Spec(
                "ux",
                f.name,
                tuple(f.params),
                full_pre,
                ok_post=closed if which == "ok" else None,
                err_post=closed if which == "err" else None,
            )
            report.specs.append(
                SynthesisedSpec(
                    s,
                    af,
                    which,
                    manifest_candidate=(
                        which == "err" and af.is_empty() and isinstance(pre, sl.Emp)
                    ),
                )
            )
    if coalesce:
        report.specs = _coalesce(report.specs)
    return report


def _coalesce(specs: list[SynthesisedSpec]) -> list[SynthesisedSpec]:
    """Merge specs with the same pre-condition and outcome by disjoining the
    post-conditions (binders renamed apart)."""
    groups: dict[tuple[str, str], list[SynthesisedSpec]] = {}
    for s in specs:
        key = (sl.print_assertion(s.spec.pre), s.outcome)
        groups.setdefault(key, []).append(s)
    out: list[SynthesisedSpec] = []
    for (_, which), members in groups.items():
        if len(members) == 1:
            out.append(members[0])
            continue
        binders: list[str] = []
        bodies: list[sl.Assertion] = []
        for i, m in enumerate(members):
            post = m.spec.post(which)
            bs: tuple[str, ...] = ()
            body = post
            if isinstance(post, sl.Exists):
                bs, body = post.names, post.body
            ren = {LVar(b): LVar(f"{b}_{i}") for b in bs}
            binders.extend(v.name for v in ren.values())
            bodies.append(sl.subst_assertion(body, ren))
        merged: sl.Assertion = bodies[0]
        for b in bodies[1:]:
            merged = sl.AOr(merged, b)
        closed = sl.Exists(tuple(binders), merged) if binders else merged
        base = members[0].spec
        spec = sl.Spec(
            base.mode,
            base.fname,
            base.params,
            base.pre,
            ok_post=closed if which == "ok" else None,
            err_post=closed if which == "err" else None,
        )
        out.append(SynthesisedSpec(spec, members[0].anti_frame, which))
    return out


def call_graph_order(functions: sx.ImplContext) -> list[str]:
    """Bottom-up topological order; cycle members keep definition order and
    rely on fuel-bounded inlining."""
    calls: dict[str, set[str]] = {}
    for name, f in functions.items():
        called: set[str] = set()

        def visit(c: sx.Cmd) -> None:
            if isinstance(c, sx.FCall) and c.fname in functions:
                called.add(c.fname)
            elif isinstance(c, sx.Seq):
                visit(c.first)
                visit(c.second)
            elif isinstance(c, sx.IfElse):
                visit(c.then)
                visit(c.els)

        visit(f.body)
        calls[name] = called
    order: list[str] = []
    seen: set[str] = set()

    def emit(name: str, stack: set[str]) -> None:
        if name in seen or name in stack:
            return
        stack.add(name)
        for callee in sorted(calls[name]):
            emit(callee, stack)
        stack.discard(name)
        seen.add(name)
        order.append(name)

    for name in functions:
        emit(name, set())
    return order


def synthesise_program(
    program: sx.Program,
    cfg: Optional[EngineConfig] = None,
    solver: Optional[Solver] = None,
    coalesce: bool = False,
    fn: Optional[str] = None,
) -> dict[str, SynthReport]:
    """Synthesise specs for every function (or one), bottom-up along the call
    graph, feeding earlier results into later call sites."""
    ctx: sl.SpecContext = {k: list(v) for k, v in program.specs.items()}
    reports: dict[str, SynthReport] = {}
    names = call_graph_order(program.functions)
    if fn is not None:
        if fn not in program.functions:
            raise ValueError(f"no function named {fn!r}")
        names = [n for n in names if n == fn or fn in _transitive_calls(program, fn)]
    for name in names:
        if fn is not None and name != fn and name not in _transitive_calls(program, fn):
            continue
        base_cfg = cfg or EngineConfig()
        run_cfg = EngineConfig(
            mode=Mode.UX,
            fuel=base_cfg.fuel,
            unfold_depth=base_cfg.unfold_depth,
            branch_limit=base_cfg.branch_limit,
            call_style=base_cfg.call_style,
            invert_mul=base_cfg.invert_mul,
            trace_sink=base_cfg.trace_sink,
        )
        rep = synthesise(
            ctx,
            program.functions[name],
            sl.Emp(),
            run_cfg,
            program.predicates,
            solver,
            impl_ctx=program.functions,
            coalesce=coalesce,
        )
        reports[name] = rep
        ctx.setdefault(name, []).extend(s.spec for s in rep.specs)
    if fn is not None:
        return {fn: reports[fn]} if fn in reports else {}
    return reports


def _transitive_calls(program: sx.Program, root: str) -> set[str]:
    out: set[str] = set()
    work = [root]
    while work:
        name = work.pop()
        f = program.functions.get(name)
        if f is None:
            continue

        def visit(c: sx.Cmd) -> None:
            if isinstance(c, sx.FCall) and c.fname in program.functions:
                if c.fname not in out:
                    out.add(c.fname)
                    work.append(c.fname)
            elif isinstance(c, sx.Seq):
                visit(c.first)
                visit(c.second)
            elif isinstance(c, sx.IfElse):
                visit(c.then)
                visit(c.els)

        visit(f.body)
    return out
