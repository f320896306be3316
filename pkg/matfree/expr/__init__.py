"""Expression DAGs, problem representations and DCP analysis."""

from .dag import ExprEdge, ExpressionDag, ExprNode, build_dag, to_expr
from .dcp import Curvature, DcpReport, DcpViolation, Sign, analyze, curvature_of, validate_dcp
from .expression import (
    Expr,
    ExpressionShapeError,
    UnknownAtomError,
    absolute,
    add,
    apply_atom,
    constant,
    conv,
    dft,
    dwt,
    mat,
    matmul,
    matrix_product,
    neg,
    norm1,
    norm2,
    scalar_mult,
    split,
    sub,
    sum_entries,
    sum_squares,
    variable,
    vec,
    vstack,
)
from .problem import Constraint, Opr, ProblemError, eq, geq, leq, minimize, soc
from .schema import ProblemSchemaError, dump_problem, dumps_problem, load_problem

__all__ = [
    "Constraint",
    "Curvature",
    "DcpReport",
    "DcpViolation",
    "Expr",
    "ExprEdge",
    "ExprNode",
    "ExpressionDag",
    "ExpressionShapeError",
    "Opr",
    "ProblemError",
    "ProblemSchemaError",
    "Sign",
    "UnknownAtomError",
    "absolute",
    "add",
    "analyze",
    "apply_atom",
    "build_dag",
    "constant",
    "conv",
    "curvature_of",
    "dft",
    "dump_problem",
    "dumps_problem",
    "dwt",
    "eq",
    "geq",
    "leq",
    "load_problem",
    "mat",
    "matmul",
    "matrix_product",
    "minimize",
    "neg",
    "norm1",
    "norm2",
    "scalar_mult",
    "soc",
    "split",
    "sub",
    "sum_entries",
    "sum_squares",
    "to_expr",
    "validate_dcp",
    "variable",
    "vec",
    "vstack",
]
