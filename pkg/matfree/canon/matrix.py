"""Explicit sparse-matrix canonicalization, used as the reference for the matrix-free path.

Each expression is reduced to a coefficient map, variable name -> sparse matrix, by walking the
expression in evaluation order and multiplying argument maps by the atom's coefficient matrix.
The maps are then assembled into one matrix, row blocks in expression order and column blocks
in variable order.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence

import scipy.sparse as sp

from ..expr.expression import Expr, topological
from ..fao.shapes import Shape
from ..logging_config import get_logger
from ..metrics import get_metrics
from .affine import CanonicalizationError, linear_fao
from .graph import VarOrder, check_linear, variable_layout

logger = get_logger(__name__)

CoeffMap = dict[str, sp.csr_matrix]


def _coefficient(node: Expr, i: int, j: int) -> sp.csr_matrix:
    if not node.args or not node.is_linear_op or node.op == "part":
        raise CanonicalizationError(f"{node.op} has no coefficient matrix")
    return sp.csr_matrix(linear_fao(node).coefficient(i, j))


def matrix_coeff(node: Expr, i: int = 0, j: int = 0) -> sp.csr_matrix:
    """Sparse D with D vec(argument i) = vec(output j) of the linear atom at ``node``."""
    get_metrics().record_materialization("matrix_coeff")
    return _coefficient(node, i, j)


def _add_into(target: CoeffMap, name: str, block: sp.csr_matrix) -> None:
    target[name] = target[name] + block if name in target else block


def coefficient_maps(expr: Expr) -> CoeffMap:
    """Coefficient map of a linear expression."""
    maps: dict[tuple[int, int], CoeffMap] = {}
    for node in topological(expr):
        if node.is_variable:
            maps[(node.id, 0)] = {node.name: sp.identity(node.size, format="csr")}
            continue
        if node.op == "part":
            maps[(node.id, 0)] = maps[(node.args[0].id, node.data)]
            continue
        arg_maps = [
            maps[(arg.args[0].id, arg.data) if arg.op == "part" else (arg.id, 0)]
            for arg in node.args
        ]
        for j in range(len(node.out_shapes) or 1):
            result: CoeffMap = {}
            for i, arg_map in enumerate(arg_maps):
                block = _coefficient(node, i, j)
                for name, matrix in arg_map.items():
                    _add_into(result, name, sp.csr_matrix(block @ matrix))
            maps[(node.id, j)] = result
    return maps[(expr.id, 0)]


def assemble(
    maps: Sequence[CoeffMap], rows: Sequence[int], layout: Mapping[str, tuple[int, Shape]]
) -> sp.csr_matrix:
    """Stack coefficient maps into one matrix; absent variables get zero blocks."""
    sizes = {name: shape.total for name, (_, shape) in layout.items()}
    blocks = []
    for coeffs, m in zip(maps, rows):
        blocks.append(
            [coeffs.get(name, sp.csr_matrix((m, size))) for name, size in sizes.items()]
        )
    return sp.bmat(blocks, format="csr")


def matrix_repr(exprs: Sequence[Expr], var_order: VarOrder) -> sp.csr_matrix:
    """Sparse matrix A with A x = vstack of ``exprs`` for x stacked in ``var_order``."""
    layout = variable_layout(var_order)
    check_linear(exprs, layout)
    get_metrics().record_materialization("matrix_repr")
    maps = [coefficient_maps(expr) for expr in exprs]
    matrix = assemble(maps, [expr.size for expr in exprs], layout)
    logger.debug("matrix_repr", rows=matrix.shape[0], cols=matrix.shape[1], nnz=matrix.nnz)
    return matrix
