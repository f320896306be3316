"""Replacing nonlinear atoms by their cone-constrained graph implementations.

Each nonlinear node f(z) is swapped for a fresh variable t together with cone constraints
stating f(z) <= t. Under the DCP rules this partial minimization leaves the optimal value
unchanged. Linear nodes are rebuilt only when one of their arguments changed, so an already
conic problem comes back with the same expression objects.
"""

from __future__ import annotations

from collections.abc import Callable, Iterator

from ..expr.dcp import DcpReport, validate_dcp
from ..expr.expression import (
    Expr,
    add,
    constant,
    scalar_mult,
    sub,
    sum_entries,
    topological,
    variable,
    vstack,
)
from ..expr.problem import Constraint, Opr
from ..fao.shapes import ShapeLike
from ..logging_config import get_logger
from .affine import CanonicalizationError

logger = get_logger(__name__)


class DcpError(ValueError):
    """Raised when a problem that fails the DCP rules is canonicalized."""

    def __init__(self, report: DcpReport) -> None:
        super().__init__(f"problem is not DCP: {report}")
        self.report = report


Fresh = Callable[[ShapeLike], Expr]
# (replacement, new variables, new constraints) for f(z)
GraphImplementation = Callable[[Expr, Fresh], tuple[Expr, list[Expr], list[Constraint]]]


def _norm2(z: Expr, fresh: Fresh) -> tuple[Expr, list[Expr], list[Constraint]]:
    t = fresh(1)
    return t, [t], [Constraint(vstack(z, t), "soc")]


def _sum_squares(z: Expr, fresh: Fresh) -> tuple[Expr, list[Expr], list[Constraint]]:
    # ||(2z, t - 1)|| <= t + 1  <=>  ||z||^2 <= t
    t = fresh(1)
    one = constant([1.0])
    cone = vstack(scalar_mult(2.0, z), sub(t, one), add(t, one))
    return t, [t], [Constraint(cone, "soc")]


def _abs(z: Expr, fresh: Fresh) -> tuple[Expr, list[Expr], list[Constraint]]:
    t = fresh(z.shape)
    return t, [t], [Constraint(sub(t, z), "nonneg"), Constraint(add(t, z), "nonneg")]


def _norm1(z: Expr, fresh: Fresh) -> tuple[Expr, list[Expr], list[Constraint]]:
    s = fresh(z.shape)
    bounds = [Constraint(sub(s, z), "nonneg"), Constraint(add(s, z), "nonneg")]
    return sum_entries(s), [s], bounds


GRAPH_IMPLEMENTATIONS: dict[str, GraphImplementation] = {
    "norm2": _norm2,
    "sum_squares": _sum_squares,
    "abs": _abs,
    "norm1": _norm1,
}


def _fresh_names(taken: set[str]) -> Iterator[str]:
    k = 0
    while True:
        name = f"_t{k}"
        k += 1
        if name not in taken:
            yield name


def conic_form(problem: Opr) -> Opr:
    """An equivalent problem whose expressions contain only linear atoms.

    New variables are appended after the existing ones and new constraints after the original
    constraints, both in the order the nonlinear nodes are met (objective first).
    """
    report = validate_dcp(problem)
    if not report.ok:
        raise DcpError(report)

    names = _fresh_names({v.name for v in problem.variables})

    def fresh(shape: ShapeLike) -> Expr:
        return variable(next(names), shape)

    new_vars: list[Expr] = []
    new_constraints: list[Constraint] = []
    rebuilt: dict[int, Expr] = {}
    for node in topological(*problem.roots):
        if not node.args:
            rebuilt[node.id] = node
            continue
        args = [rebuilt[arg.id] for arg in node.args]
        implementation = GRAPH_IMPLEMENTATIONS.get(node.op)
        if implementation is None:
            if not node.is_linear_op:
                raise CanonicalizationError(f"no graph implementation for {node.op!r}")
            rebuilt[node.id] = node.with_args(args)
            continue
        replacement, variables, constraints = implementation(args[0], fresh)
        rebuilt[node.id] = replacement
        new_vars.extend(variables)
        new_constraints.extend(constraints)

    if not new_vars:
        return problem
    objective = rebuilt[problem.objective.id]
    constraints = [Constraint(rebuilt[c.expr.id], c.cone) for c in problem.constraints]
    logger.debug(
        "conic_form",
        new_variables=len(new_vars),
        new_constraints=len(new_constraints),
    )
    return problem.with_parts(
        objective,
        constraints + new_constraints,
        list(problem.variables) + new_vars,
    )


def new_variable_names(original: Opr, conic: Opr) -> tuple[str, ...]:
    known = {v.name for v in original.variables}
    return tuple(v.name for v in conic.variables if v.name not in known)


def is_conic(problem: Opr) -> bool:
    return all(not node.args or node.is_linear_op for node in topological(*problem.roots))

