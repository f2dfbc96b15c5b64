"""Command-line entry point: run / test / verify / synth over program files.

Exit codes: 0 clean, 1 findings (bugs or verification failure), 2 usage or
input error, 3 internal limit hit.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from . import analyses, speclang as sl, syntax as sx
from .concrete import Budget, CState, exec_concrete
from .engine import EngineConfig, Mode
from .parser import CseParseError, parse_program
from .solver import Solver, make_solver
from .terms import NIL


def _config_file_values(path: str = "cse.toml") -> dict[str, str]:
    out: dict[str, str] = {}
    p = Path(path)
    if not p.exists():
        return out
    for line in p.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#") or "=" not in line:
            continue
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip().strip('"')
    return out


def _resolve(flag, env_key: str, file_vals: dict, file_key: str, default, cast=str):
    if flag is not None:
        return flag
    if env_key in os.environ:
        return cast(os.environ[env_key])
    if file_key in file_vals:
        return cast(file_vals[file_key])
    return default


def build_arg_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="cse",
        description="Compositional symbolic execution: testing, verification, spec synthesis.",
    )
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("run", "run main concretely"),
        ("test", "whole-program symbolic testing (EX core engine)"),
        ("verify", "check OX specifications against implementations"),
        ("synth", "synthesise UX specifications by bi-abduction"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("file", help="program file")
        p.add_argument("--mode", choices=["ox", "ux", "ex"], default=None)
        p.add_argument("--fuel", type=int, default=None)
        p.add_argument("--unfold-depth", type=int, default=None)
        p.add_argument("--branch-limit", type=int, default=None)
        p.add_argument("--solver", default=None, help="internal or smt:<path>")
        p.add_argument("--jobs", type=int, default=1, help="worker pool size (1 = reference mode)")
        p.add_argument("--json", action="store_true")
        p.add_argument("--trace", action="store_true")
        p.add_argument("--dump-plans", action="store_true")
        p.add_argument("--dump-consume", action="store_true")
        if name == "verify":
            p.add_argument("--spec", default=None, help="label of the spec to check")
            p.add_argument("--fn", default=None, help="only verify this function")
        if name == "synth":
            p.add_argument("--fn", default=None, help="only synthesise this function")
            p.add_argument("--coalesce", action="store_true")
        p.add_argument("--inline-only", action="store_true")
        p.add_argument("--spec-only", action="store_true")
    return ap


_REQUIRED_MODE = {"test": Mode.EX, "verify": Mode.OX, "synth": Mode.UX}


def _engine_config(args) -> EngineConfig:
    file_vals = _config_file_values()
    fuel = _resolve(args.fuel, "CSE_FUEL", file_vals, "fuel", 8, int)
    unfold = _resolve(args.unfold_depth, "CSE_UNFOLD_DEPTH", file_vals, "unfold_depth", 2, int)
    limit = _resolve(args.branch_limit, "CSE_BRANCH_LIMIT", file_vals, "branch_limit", 10_000, int)
    mode = _REQUIRED_MODE.get(args.command, Mode.EX)
    if args.mode is not None and Mode(args.mode) is not mode and args.command != "run":
        raise SystemExit(f"cse {args.command} requires --mode {mode.value}")
    style = "prefer-spec"
    if args.inline_only:
        style = "inline-only"
    if args.spec_only:
        style = "spec-only"
    return EngineConfig(
        mode=mode, fuel=fuel, unfold_depth=unfold, branch_limit=limit, call_style=style
    )


def _make_solver(args) -> Solver:
    file_vals = _config_file_values()
    sel = _resolve(args.solver, "CSE_SOLVER", file_vals, "solver", "internal")
    return make_solver(sel)


def _load(path: str) -> sx.Program:
    try:
        return parse_program(Path(path).read_text())
    except FileNotFoundError:
        raise SystemExit(2, f"no such file: {path}")
    except CseParseError as e:
        print(f"{path}:{e}", file=sys.stderr)
        raise SystemExit(2)


def _emit_trace_list(trace, args) -> None:
    if trace is None:
        return
    for entry in trace:
        rule = entry.split(":", 1)[0]
        if args.trace or (args.dump_plans and rule == "plan") or (
            args.dump_consume and rule.startswith(("cons", "produce", "prodCell"))
        ):
            detail = entry.split(": ", 1)[1] if ": " in entry else ""
            print(json.dumps({"rule": rule, "detail": detail}, sort_keys=True), file=sys.stderr)


def cmd_run(args) -> int:
    prog = _load(args.file)
    if prog.main is None:
        print("program has no main block", file=sys.stderr)
        return 2
    cfg = _engine_config(args)
    store = {x: NIL for x in sorted(sx.pv_cmd(prog.main))}
    results = exec_concrete(
        CState(store, {}), prog.main, prog.functions, fuel=cfg.fuel, budget=Budget()
    )
    payload = [
        {
            "outcome": o.value,
            "store": {k: repr(v) for k, v in sorted(st.store.items())},
            "heap": {str(n): repr(c) for n, c in sorted(st.heap.items())},
        }
        for o, st in results
    ]
    if args.json:
        print(json.dumps({"results": payload}, sort_keys=True, indent=2))
    else:
        for r in payload:
            print(f"{r['outcome']}: store={r['store']} heap={r['heap']}")
    return 0


def cmd_test(args) -> int:
    prog = _load(args.file)
    if prog.main is None:
        print("program has no main block", file=sys.stderr)
        return 2
    cfg = _engine_config(args)
    if args.trace or args.dump_plans or args.dump_consume:
        cfg.trace_sink = []
    solver = _make_solver(args)
    report = analyses.symtest(prog, cfg, solver)
    _emit_trace_list(cfg.trace_sink, args)
    payload = {
        "violations": [
            {"assert": v.expr, "pc": v.pc, "witness": v.witness} for v in report.violations
        ],
        "leaves": report.leaves,
        "coverage_incomplete": report.coverage_incomplete,
    }
    if args.json:
        print(json.dumps(payload, sort_keys=True, indent=2))
    else:
        for v in report.violations:
            print(f"assert violation: {v.expr}  [pc: {v.pc}]"
                  + (f"  witness: {v.witness}" if v.witness else ""))
        print(f"{len(report.violations)} violation(s), {report.leaves} leaves")
    if report.coverage_incomplete:
        return 3
    return 1 if report.violations else 0


def cmd_verify(args) -> int:
    prog = _load(args.file)
    cfg = _engine_config(args)
    solver = _make_solver(args)
    results = []
    failed = False
    for fname, specs in sorted(prog.specs.items()):
        for s in specs:
            if s.mode != "ox":
                continue
            if args.spec and s.name != args.spec:
                continue
            if args.fn and fname != args.fn:
                continue
            if fname not in prog.functions:
                results.append({"function": fname, "spec": s.name, "verified": False,
                                "reason": "no implementation"})
                failed = True
                continue
            ctx = {k: [t for t in v] for k, v in prog.specs.items() if k != fname}
            run_cfg = EngineConfig(
                mode=Mode.OX, fuel=cfg.fuel, unfold_depth=cfg.unfold_depth,
                branch_limit=cfg.branch_limit, call_style=cfg.call_style,
            )
            if args.trace or args.dump_plans or args.dump_consume:
                run_cfg.trace_sink = []
            res = analyses.verify_ox(
                ctx, prog.functions[fname], s, run_cfg, prog.predicates, solver
            )
            _emit_trace_list(run_cfg.trace_sink, args)
            results.append(
                {"function": fname, "spec": s.name, "verified": res.verified,
                 "reason": res.reason}
            )
            failed = failed or not res.verified
    if not results:
        print("no matching OX specifications to verify", file=sys.stderr)
        return 2
    if args.json:
        print(json.dumps({"results": results}, sort_keys=True, indent=2))
    else:
        for r in results:
            tag = "verified" if r["verified"] else f"FAILED ({r['reason']})"
            label = f" [{r['spec']}]" if r["spec"] else ""
            print(f"{r['function']}{label}: {tag}")
    return 1 if failed else 0


def cmd_synth(args) -> int:
    prog = _load(args.file)
    cfg = _engine_config(args)
    if args.trace or args.dump_plans or args.dump_consume:
        cfg.trace_sink = []
    solver = _make_solver(args)
    try:
        reports = analyses.synthesise_program(
            prog, cfg, solver, coalesce=args.coalesce, fn=args.fn
        )
    except ValueError as e:
        print(str(e), file=sys.stderr)
        return 2
    _emit_trace_list(cfg.trace_sink, args)
    payload = {}
    for name, rep in sorted(reports.items()):
        payload[name] = [
            {
                "mode": s.spec.mode,
                "outcome": s.outcome,
                "pre": sl.print_assertion(s.spec.full_pre()),
                "post": sl.print_assertion(s.spec.post(s.outcome)),
                "anti_frame": repr(s.anti_frame),
                "manifest_candidate": s.manifest_candidate,
            }
            for s in rep.specs
        ]
    if args.json:
        print(json.dumps(payload, sort_keys=True, indent=2))
    else:
        for name, specs in sorted(payload.items()):
            print(f"{name}: {len(specs)} spec(s)")
            for s in specs:
                print(f"  [{s['pre']}] {name} [{s['outcome']}: {s['post']}]")
                if s["manifest_candidate"]:
                    print("    (manifest bug candidate)")
    bug_specs = sum(
        1 for specs in payload.values() for s in specs if s["outcome"] == "err"
    )
    return 1 if bug_specs else 0


def main(argv: Optional[list[str]] = None) -> int:
    args = build_arg_parser().parse_args(argv)
    if args.jobs < 1:
        print("--jobs must be at least 1", file=sys.stderr)
        return 2
    try:
        return {"run": cmd_run, "test": cmd_test, "verify": cmd_verify, "synth": cmd_synth}[
            args.command
        ](args)
    except SystemExit as e:
        if isinstance(e.code, tuple):
            print(e.code[1], file=sys.stderr)
            return e.code[0]
        raise


if __name__ == "__main__":
    sys.exit(main())
