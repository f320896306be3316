"""Matrix-free canonicalization of a DCP problem into a cone program.

The result is

    minimize  c^T x + d   subject to  A x + b in K

where A is held as an optimized FAO DAG and K is the product of the constraint cones, in
constraint order.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import scipy.sparse as sp

from ..expr.expression import Expr
from ..expr.problem import Opr
from ..fao.dag import FaoDag
from ..fao.memory import plan_memory
from ..fao.rewrite import optimize
from ..fao.shapes import Shape
from ..logging_config import get_logger
from ..solver.cones import Cone
from .affine import CanonicalizationError, constant_part, evaluate_constant, linear_part
from .conic import DcpError, conic_form, new_variable_names
from .graph import graph_repr
from .matrix import matrix_repr

logger = get_logger(__name__)

__all__ = ["CanonicalizationError", "ConeProgram", "DcpError", "canonicalize", "manifest"]


@dataclass
class ConeProgram:
    c: np.ndarray
    d: np.ndarray
    b: np.ndarray
    G: FaoDag | None
    cones: tuple[Cone, ...]
    var_index: dict[str, tuple[int, int]]
    variable_shapes: dict[str, Shape]
    new_vars: tuple[str, ...] = ()
    constraint_exprs: tuple[Expr, ...] = field(default=(), repr=False)

    @property
    def n(self) -> int:
        return int(self.c.size)

    @property
    def m(self) -> int:
        return int(self.b.size)

    @property
    def offset(self) -> float:
        return float(self.d[0])

    def sparse_matrix(self) -> sp.csr_matrix:
        """The constraint matrix built explicitly from the constraint expressions."""
        if not self.constraint_exprs:
            return sp.csr_matrix((0, self.n))
        return matrix_repr(list(self.constraint_exprs), self.variable_shapes)

    def objective_value(self, x: np.ndarray) -> float:
        return float(self.c @ x) + self.offset

    def variable_values(
        self, x: np.ndarray, *, include_new: bool = False
    ) -> dict[str, np.ndarray]:
        """Split x into named, shaped variable values."""
        values: dict[str, np.ndarray] = {}
        for name, (offset, length) in self.var_index.items():
            if name in self.new_vars and not include_new:
                continue
            shape = self.variable_shapes[name]
            values[name] = np.reshape(x[offset : offset + length], shape.dims, order="F")
        return values

    def stack(self, values: Mapping[str, Any]) -> np.ndarray:
        """The x vector for named variable values; missing variables are zero."""
        x = np.zeros(self.n)
        for name, value in values.items():
            offset, length = self.var_index[name]
            x[offset : offset + length] = np.ravel(value, order="F")
        return x


def canonicalize(problem: Opr) -> ConeProgram:
    """Compile ``problem`` into a matrix-free cone program.

    Raises :class:`DcpError` when the problem fails the DCP rules.
    """
    conic = conic_form(problem)
    if not conic.variables:
        raise CanonicalizationError("the problem has no variables")
    order = {v.name: v.shape for v in conic.variables}
    var_index: dict[str, tuple[int, int]] = {}
    offset = 0
    for name, shape in order.items():
        var_index[name] = (offset, shape.total)
        offset += shape.total

    source = conic.variables[0]
    objective = conic.objective
    c = matrix_repr([linear_part(objective, source)], order).toarray().ravel()
    d = evaluate_constant(constant_part(objective))

    linear = [linear_part(con.expr, source) for con in conic.constraints]
    if linear:
        b = np.concatenate(
            [evaluate_constant(constant_part(con.expr)) for con in conic.constraints]
        )
        G = optimize(graph_repr(linear, order))
    else:
        b = np.zeros(0)
        G = None
    cones = tuple(Cone(con.cone, con.size) for con in conic.constraints)

    program = ConeProgram(
        c=c,
        d=d,
        b=b,
        G=G,
        cones=cones,
        var_index=var_index,
        variable_shapes=dict(order),
        new_vars=new_variable_names(problem, conic),
        constraint_exprs=tuple(linear),
    )
    logger.info(
        "canonicalized",
        n=program.n,
        m=program.m,
        cones=len(cones),
        new_variables=len(program.new_vars),
        nodes=len(G) if G is not None else 0,
    )
    return program


def manifest(program: ConeProgram) -> dict[str, Any]:
    """JSON-ready summary of a cone program."""
    summary: dict[str, Any] = {
        "n": program.n,
        "m": program.m,
        "cones": [cone.to_dict() for cone in program.cones],
        "variables": {
            name: {"offset": offset, "length": length}
            for name, (offset, length) in program.var_index.items()
        },
        "new_vars": list(program.new_vars),
        "nodes": 0,
        "edges": 0,
        "fast_transforms": 0,
        "memory_plan_size": 0,
        "naive_size": 0,
    }
    if program.G is not None:
        plan = plan_memory(program.G)
        summary.update(
            nodes=len(program.G.nodes),
            edges=len(program.G.edges),
            node_kinds=program.G.kinds(),
            fast_transforms=program.G.fast_transform_count(),
            memory_plan_size=plan.global_size,
            naive_size=plan.naive_size,
        )
    return summary
