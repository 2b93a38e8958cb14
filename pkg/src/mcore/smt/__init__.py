"""Symbolic expressions, simplification, SMT-LIB text and the solver session."""

from mcore.smt.constraints import ConstraintSet
from mcore.smt.evaluate import ArrayValue, evaluate
from mcore.smt.expression import (
    BOOL,
    FALSE,
    TRUE,
    Array,
    ArraySort,
    BitVec,
    BitVecSort,
    Bool,
    BoolConstant,
    ConstArray,
    Constant,
    Expression,
    ExpressionError,
    Operation,
    Sort,
    Variable,
    and_,
    as_int,
    bv,
    concat,
    ite,
    is_false,
    is_true,
    make_constant,
    make_operation,
    not_,
    or_,
    select,
    store,
)
from mcore.smt.simplify import simplify
from mcore.smt.smtlib import parse_script, to_smtlib
from mcore.smt.solver import (
    NoModel,
    Solver,
    SolverConfig,
    SolverError,
    SolverResult,
    SolverUnavailable,
    SolverUnknown,
    Verdict,
    default_solver,
)
