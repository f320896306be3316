"""Evaluating problems at given variable values."""

from __future__ import annotations

from collections.abc import Mapping

import numpy as np

from ..expr.expression import Expr, constant, transform
from ..expr.problem import Constraint, Opr
from ..solver.cones import Cone, distance
from .affine import CanonicalizationError, evaluate_constant


def evaluate_expr(expr: Expr, values: Mapping[str, np.ndarray]) -> np.ndarray:
    """Value of ``expr`` (flattened column-major) with variables taken from ``values``."""

    def substitute(leaf: Expr) -> Expr:
        if not leaf.is_variable:
            return leaf
        if leaf.name not in values:
            raise CanonicalizationError(f"no value for variable {leaf.name!r}")
        value = np.asarray(values[leaf.name], dtype=np.float64)
        return constant(value.reshape(leaf.shape.dims, order="F"))

    return evaluate_constant(transform([expr], substitute)[0])


def constraint_violation(constraint: Constraint, values: Mapping[str, np.ndarray]) -> float:
    """Distance from the constraint expression's value to its cone."""
    value = evaluate_expr(constraint.expr, values)
    return distance([Cone(constraint.cone, value.size)], value)


def max_violation(problem: Opr, values: Mapping[str, np.ndarray]) -> float:
    return max((constraint_violation(c, values) for c in problem.constraints), default=0.0)


def objective_value(problem: Opr, values: Mapping[str, np.ndarray]) -> float:
    return float(evaluate_expr(problem.objective, values)[0])
