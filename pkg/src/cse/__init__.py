"""Compositional symbolic execution for a heap-manipulating while-language.

Exact core symbolic execution, consume/produce-based OX/UX compositional
execution, UX bi-abduction, and three analyses on top: whole-program symbolic
testing, OX verification, and UX specification synthesis.
"""

from .analyses import symtest, synthesise, synthesise_program, verify_ox
from .biabduction import AntiFrame, BiabEngine, exec_biab, fix_for
from .concrete import Budget, CState, Outcome, compose_state, eval_expr, exec_concrete
from .consprod import ConsumeAbort, ConsumeSuccess, Mode, consume, produce
from .engine import Engine, EngineConfig, collect, exec_sym
from .matchplan import MatchingPlan, PlanFailure, ins_outs_learn, plan
from .parser import parse_assertion, parse_command, parse_expression, parse_program, print_program
from .solver import SatResult, Solver, enumerate_models, make_solver
from .symstate import PredInstance, SymHeap, SymState, compose_sym, satisfies, wf_check
from .speclang import Assertion, Predicate, Spec, assertion_sat, to_assertion

__all__ = [name for name in dir() if not name.startswith("_")]
