"""Affine decomposition of expressions and the mapping from linear atoms to FAOs.

An affine expression e(x) = L(x) + b splits into its linear part L, where every constant start
node is replaced by a zero map out of a variable, and its constant part b, where every variable
start node is replaced by a zero constant.
"""

from __future__ import annotations

from collections.abc import Sequence
from typing import overload

import numpy as np

from ..config.settings import get_config
from ..expr.dag import ExpressionDag, build_dag, to_expr
from ..expr.expression import (
    LINEAR_OPS,
    Expr,
    constant,
    topological,
    transform,
    variable,
    zero,
)
from ..fao.atoms import (
    Mat,
    MatrixProduct,
    ScalarMult,
    Split,
    Sum,
    SumEntries,
    Vec,
    VStack,
    ZeroMap,
    make_matrix_mult,
)
from ..fao.base import Fao, workspace
from ..fao.transforms import Convolution, Dft, Dwt

FALLBACK_ZERO_SOURCE = "_zero_source"


class CanonicalizationError(ValueError):
    """Raised when a canonicalization step receives an expression it cannot handle."""


def require_linear(roots: Sequence[Expr], *, allow_constants: bool = True) -> None:
    for node in topological(*roots):
        if node.args and node.op not in LINEAR_OPS:
            raise CanonicalizationError(f"{node.op} is not linear")
        if node.is_constant and not allow_constants:
            raise CanonicalizationError("linear expressions cannot contain constants")


def linear_fao(node: Expr) -> Fao:
    """The oracle implementing the linear atom at ``node``."""
    op, data = node.op, node.data
    if op not in LINEAR_OPS or op == "part":
        raise CanonicalizationError(f"no linear oracle for {op!r}")
    arg_shape = node.args[0].shape
    if op == "sum":
        return Sum(len(node.args), node.shape)
    if op == "scalar_mult":
        return ScalarMult(data, node.shape)
    if op == "matmul":
        variant, matrix = data
        return make_matrix_mult(variant, matrix)
    if op == "conv":
        variant, kernel = data
        if variant == "circular" and kernel.shape != arg_shape.dims:
            kernel = np.pad(kernel, [(0, n - p) for n, p in zip(arg_shape.dims, kernel.shape)])
        return Convolution(
            variant, kernel, arg_shape, direct_kernel_max=get_config().fao.direct_kernel_max
        )
    if op == "dft":
        return Dft(node.shape)
    if op == "dwt":
        levels, wavelet = data
        return Dwt(node.shape, levels=levels, wavelet=wavelet)
    if op == "matrix_product":
        return MatrixProduct(*data)
    if op == "vec":
        return Vec(*arg_shape.dims)
    if op == "mat":
        return Mat(*data)
    if op == "vstack":
        return VStack([arg.shape for arg in node.args])
    if op == "split":
        return Split(data)
    if op == "sum_entries":
        return SumEntries(arg_shape)
    return ZeroMap(arg_shape, data)


def _as_expr(e: Expr | ExpressionDag) -> Expr:
    return to_expr(e) if isinstance(e, ExpressionDag) else e


def _like(original: Expr | ExpressionDag, result: Expr) -> Expr | ExpressionDag:
    return build_dag(result) if isinstance(original, ExpressionDag) else result


@overload
def linear_part(e: Expr, zero_source: Expr | None = None) -> Expr: ...


@overload
def linear_part(e: ExpressionDag, zero_source: Expr | None = None) -> ExpressionDag: ...


def linear_part(
    e: Expr | ExpressionDag, zero_source: Expr | None = None
) -> Expr | ExpressionDag:
    """L in e(x) = L(x) + b.

    Constants become zero maps whose argument is a variable: the first variable of ``e``,
    else ``zero_source``, else a scalar placeholder variable.
    """
    expr = _as_expr(e)
    require_linear([expr])
    variables = expr.variables()
    if variables:
        source = variables[0]
    elif zero_source is not None:
        source = zero_source
    else:
        source = variable(FALLBACK_ZERO_SOURCE, 1)

    def replace(leaf: Expr) -> Expr:
        return zero(source, leaf.shape) if leaf.is_constant else leaf

    return _like(e, transform([expr], replace)[0])


@overload
def constant_part(e: Expr) -> Expr: ...


@overload
def constant_part(e: ExpressionDag) -> ExpressionDag: ...


def constant_part(e: Expr | ExpressionDag) -> Expr | ExpressionDag:
    """b in e(x) = L(x) + b: every variable becomes a zero constant."""
    expr = _as_expr(e)
    require_linear([expr])

    def replace(leaf: Expr) -> Expr:
        return constant(np.zeros(leaf.shape.dims)) if leaf.is_variable else leaf

    return _like(e, transform([expr], replace)[0])


def _forward_flat(fao: Fao, inputs: list[np.ndarray]) -> list[np.ndarray]:
    outputs = [np.empty(s.total, dtype=np.float64) for s in fao.out_shapes]
    fao.forward(inputs, outputs, workspace(fao, None))
    return outputs


def _nonlinear_value(op: str, x: np.ndarray) -> np.ndarray:
    if op == "sum_squares":
        return np.array([x @ x])
    if op == "norm2":
        return np.array([np.linalg.norm(x)])
    if op == "norm1":
        return np.array([np.abs(x).sum()])
    if op == "abs":
        return np.abs(x)
    raise CanonicalizationError(f"cannot evaluate {op!r}")


def evaluate_constant(e: Expr | ExpressionDag) -> np.ndarray:
    """The value of a constant expression, flattened column-major.

    A split root yields its outputs stacked.
    """
    expr = _as_expr(e)
    values: dict[int, list[np.ndarray]] = {}
    for node in topological(expr):
        if node.is_variable:
            raise CanonicalizationError(
                f"variable {node.name!r} in an expression expected to be constant"
            )
        if node.is_constant:
            values[node.id] = [np.ravel(node.data, order="F").astype(np.float64)]
        elif node.op == "part":
            values[node.id] = [values[node.args[0].id][node.data]]
        elif node.op in LINEAR_OPS:
            inputs = [values[arg.id][0] for arg in node.args]
            values[node.id] = _forward_flat(linear_fao(node), inputs)
        else:
            values[node.id] = [_nonlinear_value(node.op, values[node.args[0].id][0])]
    return np.concatenate(values[expr.id])
