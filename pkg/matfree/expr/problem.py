"""Optimization problem representations: a minimized objective and cone constraints."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any, Literal

from ..fao.shapes import Shape
from .expression import Expr, promote, sub, unique_variables, vstack

ConeSymbol = Literal["zero", "nonneg", "soc"]
CONE_SYMBOLS: tuple[str, ...] = ("zero", "nonneg", "soc")


class ProblemError(ValueError):
    """Raised for malformed problems: unsupported sense, unknown cone, non-scalar objective."""


@dataclass(frozen=True)
class Constraint:
    """``expr`` ∈ K where K is the cone named by ``cone``.

    Second-order cone members are laid out as (x, t) with t last; matrix expressions are
    flattened column-major.
    """

    expr: Expr
    cone: str

    def __post_init__(self) -> None:
        if self.cone not in CONE_SYMBOLS:
            raise ProblemError(f"unknown cone {self.cone!r}; expected one of {CONE_SYMBOLS}")

    @property
    def size(self) -> int:
        return self.expr.size


def _pair(left: Any, right: Any) -> tuple[Expr, Expr]:
    if isinstance(left, Expr):
        return left, promote(right, left.shape)
    if isinstance(right, Expr):
        return promote(left, right.shape), right
    raise TypeError("a constraint needs at least one expression")


def leq(left: Any, right: Any) -> Constraint:
    """left <= right elementwise."""
    left, right = _pair(left, right)
    return Constraint(sub(right, left), "nonneg")


def geq(left: Any, right: Any) -> Constraint:
    """left >= right elementwise."""
    left, right = _pair(left, right)
    return Constraint(sub(left, right), "nonneg")


def eq(left: Any, right: Any) -> Constraint:
    left, right = _pair(left, right)
    return Constraint(sub(left, right), "zero")


def soc(x: Expr, t: Expr) -> Constraint:
    """||x||_2 <= t."""
    return Constraint(vstack(x, t), "soc")


@dataclass(frozen=True)
class Opr:
    """minimize ``objective`` subject to ``constraints``.

    ``variables`` fixes the variable order (declaration order); when omitted, variables are
    ordered by first appearance in the objective and then in the constraints. ``info`` carries
    free-form metadata such as generator ground truth.
    """

    objective: Expr
    constraints: tuple[Constraint, ...] = ()
    variables: tuple[Expr, ...] = ()
    sense: str = "minimize"
    info: dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if self.sense != "minimize":
            raise ProblemError(f"only minimization is supported, got sense {self.sense!r}")
        if self.objective.size != 1:
            raise ProblemError(f"the objective must be scalar, got shape {self.objective.shape}")
        object.__setattr__(self, "constraints", tuple(self.constraints))
        used = unique_variables([self.objective, *(c.expr for c in self.constraints)])
        declared = tuple(self.variables)
        names = [v.name for v in declared]
        if len(set(names)) != len(names):
            raise ProblemError(f"duplicate variable declarations in {names}")
        missing = [v.name for v in used if v.name not in names]
        order = declared + tuple(v for v in used if v.name in missing)
        shapes = {v.name: v.shape for v in order}
        for v in used:
            if shapes[v.name] != v.shape:
                raise ProblemError(
                    f"variable {v.name!r} declared as {shapes[v.name]} but used as {v.shape}"
                )
        object.__setattr__(self, "variables", order)

    @property
    def variable_shapes(self) -> dict[str, Shape]:
        return {v.name: v.shape for v in self.variables}

    @property
    def roots(self) -> list[Expr]:
        return [self.objective, *(c.expr for c in self.constraints)]

    def with_parts(
        self,
        objective: Expr,
        constraints: Sequence[Constraint],
        variables: Sequence[Expr] | None = None,
    ) -> Opr:
        return Opr(
            objective,
            tuple(constraints),
            tuple(self.variables if variables is None else variables),
            self.sense,
            dict(self.info),
        )


def minimize(objective: Expr, constraints: Sequence[Constraint] = (), **kwargs: Any) -> Opr:
    return Opr(objective, tuple(constraints), **kwargs)
