"""Bit-vector expressions and an exact decision procedure."""

from ecpart.smt.expr import Expr, ExprError, evaluate
from ecpart.smt.normalize import normalize
from ecpart.smt.solver import SatResult, SolverBudgetExceeded, check_equiv, is_sat, models
from ecpart.smt.text import parse_sexpr, to_infix, to_sexpr, to_smtlib

__all__ = [
    "Expr", "ExprError", "SatResult", "SolverBudgetExceeded", "check_equiv", "evaluate", "is_sat",
    "models", "normalize", "parse_sexpr", "to_infix", "to_sexpr", "to_smtlib",
]
