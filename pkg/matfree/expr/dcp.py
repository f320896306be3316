"""Disciplined convex programming: curvature and sign propagation.

Curvature is computed bottom-up with the composition rule: f(g_1, ..., g_k) is convex when f
is convex and, for every argument, g_i is affine, or g_i is convex and f is nondecreasing in
argument i, or g_i is concave and f is nonincreasing in argument i (concave symmetrically).
Monotonicity may depend on the sign of an argument, so signs are propagated alongside.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Any

import numpy as np
import scipy.sparse as sp

from .expression import Expr, UnknownAtomError, topological

if TYPE_CHECKING:
    from .problem import Opr


class Curvature(str, Enum):
    CONSTANT = "constant"
    AFFINE = "affine"
    CONVEX = "convex"
    CONCAVE = "concave"
    UNKNOWN = "unknown"

    @property
    def is_convex(self) -> bool:
        return self in (Curvature.CONSTANT, Curvature.AFFINE, Curvature.CONVEX)

    @property
    def is_concave(self) -> bool:
        return self in (Curvature.CONSTANT, Curvature.AFFINE, Curvature.CONCAVE)

    @property
    def is_affine(self) -> bool:
        return self in (Curvature.CONSTANT, Curvature.AFFINE)


class Sign(str, Enum):
    NONNEG = "nonneg"
    NONPOS = "nonpos"
    UNKNOWN = "unknown"


class Monotonicity(str, Enum):
    INCREASING = "increasing"
    DECREASING = "decreasing"
    NONE = "none"


def join(left: Curvature, right: Curvature) -> Curvature:
    """Curvature of a sum of terms with the given curvatures."""
    if left is Curvature.CONSTANT:
        return right
    if right is Curvature.CONSTANT or left is right:
        return left
    if left is Curvature.AFFINE:
        return right
    if right is Curvature.AFFINE:
        return left
    return Curvature.UNKNOWN


def combine_signs(signs: Sequence[Sign]) -> Sign:
    if signs and all(s is Sign.NONNEG for s in signs):
        return Sign.NONNEG
    if signs and all(s is Sign.NONPOS for s in signs):
        return Sign.NONPOS
    return Sign.UNKNOWN


def _data_sign(values: Any) -> Sign:
    if sp.issparse(values):
        values = values.data
    values = np.asarray(values)
    if values.size == 0 or np.all(values >= 0):
        return Sign.NONNEG
    if np.all(values <= 0):
        return Sign.NONPOS
    return Sign.UNKNOWN


def _matrix_sign(expr: Expr) -> Sign:
    """Sign of the entries of the constant operand of a multiplication atom."""
    if expr.op in ("matmul", "conv"):
        variant, matrix = expr.data
        if variant == "low-rank":
            left, right = matrix
            return _product_sign([_data_sign(left), _data_sign(right)])
        return _data_sign(matrix)
    if expr.op == "matrix_product":
        left, right = expr.data
        return _product_sign([_data_sign(left), _data_sign(right)])
    if expr.op == "scalar_mult":
        return _data_sign(expr.data)
    return Sign.UNKNOWN


def _product_sign(signs: Sequence[Sign]) -> Sign:
    if any(s is Sign.UNKNOWN for s in signs):
        return Sign.UNKNOWN
    negatives = sum(1 for s in signs if s is Sign.NONPOS)
    return Sign.NONPOS if negatives % 2 else Sign.NONNEG


@dataclass(frozen=True)
class AtomRule:
    """Curvature of an atom and its monotonicity in an argument, given that argument's sign."""

    curvature: Curvature
    monotonicity: Callable[[Expr, Sign], Monotonicity]
    sign: Callable[[Expr, list[Sign]], Sign]


def _increasing(expr: Expr, arg_sign: Sign) -> Monotonicity:
    return Monotonicity.INCREASING


def _by_operand_sign(expr: Expr, arg_sign: Sign) -> Monotonicity:
    sign = _matrix_sign(expr)
    if sign is Sign.NONNEG:
        return Monotonicity.INCREASING
    if sign is Sign.NONPOS:
        return Monotonicity.DECREASING
    return Monotonicity.NONE


def _no_monotonicity(expr: Expr, arg_sign: Sign) -> Monotonicity:
    return Monotonicity.NONE


def _magnitude(expr: Expr, arg_sign: Sign) -> Monotonicity:
    """Monotonicity of |x|-like atoms: increasing on nonnegative arguments and vice versa."""
    if arg_sign is Sign.NONNEG:
        return Monotonicity.INCREASING
    if arg_sign is Sign.NONPOS:
        return Monotonicity.DECREASING
    return Monotonicity.NONE


def _same_sign(expr: Expr, signs: list[Sign]) -> Sign:
    return combine_signs(signs)


def _scaled_sign(expr: Expr, signs: list[Sign]) -> Sign:
    return _product_sign([_matrix_sign(expr), signs[0]])


def _unknown_sign(expr: Expr, signs: list[Sign]) -> Sign:
    return Sign.UNKNOWN


def _nonneg(expr: Expr, signs: list[Sign]) -> Sign:
    return Sign.NONNEG


ATOM_RULES: dict[str, AtomRule] = {
    "sum": AtomRule(Curvature.AFFINE, _increasing, _same_sign),
    "scalar_mult": AtomRule(Curvature.AFFINE, _by_operand_sign, _scaled_sign),
    "matmul": AtomRule(Curvature.AFFINE, _by_operand_sign, _scaled_sign),
    "conv": AtomRule(Curvature.AFFINE, _by_operand_sign, _scaled_sign),
    "matrix_product": AtomRule(Curvature.AFFINE, _by_operand_sign, _scaled_sign),
    "dft": AtomRule(Curvature.AFFINE, _no_monotonicity, _unknown_sign),
    "dwt": AtomRule(Curvature.AFFINE, _no_monotonicity, _unknown_sign),
    "vec": AtomRule(Curvature.AFFINE, _increasing, _same_sign),
    "mat": AtomRule(Curvature.AFFINE, _increasing, _same_sign),
    "vstack": AtomRule(Curvature.AFFINE, _increasing, _same_sign),
    "split": AtomRule(Curvature.AFFINE, _increasing, _same_sign),
    "part": AtomRule(Curvature.AFFINE, _increasing, _same_sign),
    "sum_entries": AtomRule(Curvature.AFFINE, _increasing, _same_sign),
    "zero": AtomRule(Curvature.AFFINE, _no_monotonicity, _nonneg),
    "sum_squares": AtomRule(Curvature.CONVEX, _magnitude, _nonneg),
    "norm2": AtomRule(Curvature.CONVEX, _magnitude, _nonneg),
    "norm1": AtomRule(Curvature.CONVEX, _magnitude, _nonneg),
    "abs": AtomRule(Curvature.CONVEX, _magnitude, _nonneg),
}


@dataclass(frozen=True)
class Annotation:
    curvature: Curvature
    sign: Sign


def _compose(expr: Expr, rule: AtomRule, args: list[Annotation]) -> Curvature:
    if all(a.curvature is Curvature.CONSTANT for a in args):
        return Curvature.CONSTANT
    result = Curvature.CONSTANT
    for arg in args:
        if arg.curvature is Curvature.UNKNOWN:
            return Curvature.UNKNOWN
        if arg.curvature.is_affine:
            term = rule.curvature
        else:
            mono = rule.monotonicity(expr, arg.sign)
            if mono is Monotonicity.NONE:
                return Curvature.UNKNOWN
            rising = (arg.curvature is Curvature.CONVEX) == (mono is Monotonicity.INCREASING)
            if rising and rule.curvature in (Curvature.AFFINE, Curvature.CONVEX):
                term = Curvature.CONVEX
            elif not rising and rule.curvature in (Curvature.AFFINE, Curvature.CONCAVE):
                term = Curvature.CONCAVE
            else:
                return Curvature.UNKNOWN
        result = join(result, term)
    return result


def analyze(*roots: Expr) -> dict[int, Annotation]:
    """Curvature and sign of every node reachable from ``roots``, keyed by node id."""
    notes: dict[int, Annotation] = {}
    for node in topological(*roots):
        if node.op == "variable":
            notes[node.id] = Annotation(Curvature.AFFINE, Sign.UNKNOWN)
            continue
        if node.op == "constant":
            notes[node.id] = Annotation(Curvature.CONSTANT, _data_sign(node.data))
            continue
        rule = ATOM_RULES.get(node.op)
        if rule is None:
            raise UnknownAtomError(node.op)
        args = [notes[arg.id] for arg in node.args]
        sign = rule.sign(node, [a.sign for a in args])
        notes[node.id] = Annotation(_compose(node, rule, args), sign)
    return notes


def curvature_of(expr: Expr) -> tuple[Curvature, Sign]:
    note = analyze(expr)[expr.id]
    return note.curvature, note.sign


def is_affine(expr: Expr) -> bool:
    return curvature_of(expr)[0].is_affine


@dataclass(frozen=True)
class DcpViolation:
    location: str
    op: str
    curvature: Curvature
    message: str


@dataclass
class DcpReport:
    violations: list[DcpViolation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self) -> str:
        if self.ok:
            return "ok"
        return "; ".join(f"{v.location}: {v.message}" for v in self.violations)


def _offending_node(expr: Expr, notes: dict[int, Annotation]) -> Expr:
    """The first node (in evaluation order) whose curvature could not be certified."""
    for node in topological(expr):
        if notes[node.id].curvature is Curvature.UNKNOWN:
            return node
    return expr


# Required curvature of a constraint expression for each cone: expr ∈ K.
_CONE_REQUIREMENTS: dict[str, tuple[str, Callable[[Curvature], bool]]] = {
    "zero": ("affine", lambda c: c.is_affine),
    "nonneg": ("concave", lambda c: c.is_concave),
    "soc": ("affine", lambda c: c.is_affine),
}


def validate_dcp(problem: Opr) -> DcpReport:
    """Check that the objective is convex and every constraint set is convex."""
    report = DcpReport()
    roots = [problem.objective, *(c.expr for c in problem.constraints)]
    notes = analyze(*roots)

    objective = notes[problem.objective.id].curvature
    if not objective.is_convex:
        node = _offending_node(problem.objective, notes)
        report.violations.append(
            DcpViolation(
                "objective",
                node.op,
                objective,
                f"minimized objective is {objective.value} (at {node.op} node)",
            )
        )
    for index, constraint in enumerate(problem.constraints):
        wanted, accepts = _CONE_REQUIREMENTS[constraint.cone]
        curvature = notes[constraint.expr.id].curvature
        if not accepts(curvature):
            node = _offending_node(constraint.expr, notes)
            report.violations.append(
                DcpViolation(
                    f"constraint {index}",
                    node.op,
                    curvature,
                    f"{constraint.cone} cone needs a {wanted} expression, got "
                    f"{curvature.value} (at {node.op} node)",
                )
            )
    return report
