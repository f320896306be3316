"""Expression handles for stating optimization problems.

An :class:`Expr` is one application of an atom to argument expressions; reusing an ``Expr``
object reuses the subexpression, so a set of expressions forms a DAG whose start nodes are
variables and constants. Variables are identified by name. Matrix-valued expressions use
column-major order whenever they are flattened.
"""

from __future__ import annotations

import itertools
import numbers
from collections.abc import Callable, Iterator, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import scipy.sparse as sp

from ..fao.shapes import Shape, ShapeLike


class UnknownAtomError(KeyError):
    """Raised when an expression names an atom outside the supported library."""


class ExpressionShapeError(ValueError):
    """Raised when atom arguments do not have compatible shapes."""


LINEAR_OPS = frozenset(
    {
        "sum",
        "scalar_mult",
        "matmul",
        "conv",
        "dft",
        "dwt",
        "matrix_product",
        "vec",
        "mat",
        "vstack",
        "split",
        "part",
        "sum_entries",
        "zero",
    }
)
NONLINEAR_OPS = frozenset({"sum_squares", "norm2", "norm1", "abs"})
LEAF_OPS = frozenset({"variable", "constant"})

_ids = itertools.count()


@dataclass(frozen=True, eq=False)
class Expr:
    """One node of an expression DAG.

    ``shape`` is the node's output shape. Split nodes have several outputs (``out_shapes``);
    they are consumed through ``part`` nodes, which select one output.
    """

    op: str
    args: tuple[Expr, ...]
    shape: Shape
    data: Any = None
    out_shapes: tuple[Shape, ...] = ()
    id: int = field(default_factory=lambda: next(_ids))

    # numpy defers ``array @ expr`` and ``array * expr`` to the reflected operators
    __array_ufunc__ = None

    @property
    def name(self) -> str | None:
        return self.data if self.op == "variable" else None

    @property
    def size(self) -> int:
        return self.shape.total

    @property
    def is_variable(self) -> bool:
        return self.op == "variable"

    @property
    def is_constant(self) -> bool:
        return self.op == "constant"

    @property
    def is_linear_op(self) -> bool:
        return self.op in LINEAR_OPS

    def with_args(self, args: Sequence[Expr]) -> Expr:
        """The same atom applied to new arguments (self when they are unchanged)."""
        args = tuple(args)
        if len(args) == len(self.args) and all(new is old for new, old in zip(args, self.args)):
            return self
        return apply_atom(self.op, args, self.data)

    def walk(self) -> Iterator[Expr]:
        """Every distinct node reachable from this one, arguments before their users."""
        return iter(topological(self))

    def variables(self) -> list[Expr]:
        """Variable nodes in order of first appearance, one per name."""
        return unique_variables([self])

    # ---- operator overloading ----

    def __add__(self, other: Any) -> Expr:
        return add(self, promote(other, self.shape))

    def __radd__(self, other: Any) -> Expr:
        return add(promote(other, self.shape), self)

    def __sub__(self, other: Any) -> Expr:
        return sub(self, promote(other, self.shape))

    def __rsub__(self, other: Any) -> Expr:
        return sub(promote(other, self.shape), self)

    def __neg__(self) -> Expr:
        return neg(self)

    def __mul__(self, other: Any) -> Expr:
        if not isinstance(other, numbers.Real):
            raise TypeError("expressions can only be multiplied by real scalars")
        return scalar_mult(float(other), self)

    __rmul__ = __mul__

    def __rmatmul__(self, other: Any) -> Expr:
        return matmul(other, self)

    def __repr__(self) -> str:
        if self.op == "variable":
            return f"Variable({self.data!r}, {self.shape})"
        if self.op == "constant":
            return f"Constant({self.shape})"
        return f"Expr({self.op}, {self.shape}, args={len(self.args)})"


def topological(*roots: Expr) -> list[Expr]:
    order: list[Expr] = []
    seen: set[int] = set()
    stack: list[tuple[Expr, bool]] = [(root, False) for root in reversed(roots)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if node.id in seen:
            continue
        seen.add(node.id)
        stack.append((node, True))
        for arg in reversed(node.args):
            if arg.id not in seen:
                stack.append((arg, False))
    return order


def unique_variables(roots: Sequence[Expr]) -> list[Expr]:
    found: dict[str, Expr] = {}
    for node in topological(*roots):
        if node.is_variable and node.name not in found:
            found[node.name] = node
        elif node.is_variable and found[node.name].shape != node.shape:
            raise ExpressionShapeError(
                f"variable {node.name!r} used with shapes {found[node.name].shape} and "
                f"{node.shape}"
            )
    return list(found.values())


def transform(roots: Sequence[Expr], leaf: Callable[[Expr], Expr]) -> list[Expr]:
    """Rebuild ``roots`` with every leaf replaced by ``leaf(node)``; shared nodes stay shared."""
    rebuilt: dict[int, Expr] = {}
    for node in topological(*roots):
        if not node.args:
            rebuilt[node.id] = leaf(node)
        else:
            rebuilt[node.id] = node.with_args([rebuilt[arg.id] for arg in node.args])
    return [rebuilt[root.id] for root in roots]


# ---- leaves ----


def variable(name: str, shape: ShapeLike) -> Expr:
    if not name:
        raise ValueError("variables need a name")
    return Expr("variable", (), Shape.of(shape), name)


def constant(value: Any) -> Expr:
    """A constant; scalars become shape (1,), arrays keep their 1-D or 2-D shape."""
    array = np.array(value, dtype=np.float64)
    if array.ndim == 0:
        array = array.reshape(1)
    if array.ndim > 2:
        raise ExpressionShapeError(f"constants must be 1-D or 2-D, got ndim={array.ndim}")
    array.setflags(write=False)
    return Expr("constant", (), Shape(array.shape), array)


def promote(value: Any, shape: Shape) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, numbers.Real):
        return constant(np.full(shape.dims, float(value)))
    return constant(value)


# ---- affine atoms ----


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ExpressionShapeError(message)


def add(*args: Expr) -> Expr:
    _require(bool(args), "sum needs at least one argument")
    shape = args[0].shape
    for arg in args[1:]:
        _require(arg.shape == shape, f"cannot add {arg.shape} to {shape}")
    return Expr("sum", tuple(args), shape)


def scalar_mult(alpha: float, x: Expr) -> Expr:
    return Expr("scalar_mult", (x,), x.shape, float(alpha))


def neg(x: Expr) -> Expr:
    return scalar_mult(-1.0, x)


def sub(x: Expr, y: Expr) -> Expr:
    return add(x, neg(y))


def _matrix_variant(matrix: Any) -> str:
    if isinstance(matrix, tuple):
        return "low-rank"
    if sp.issparse(matrix):
        return "sparse"
    return "dense"


def matmul(matrix: Any, x: Expr, variant: str | None = None) -> Expr:
    """Multiplication of a vector expression by a dense, sparse or low-rank ``(B, C)`` matrix."""
    variant = variant or _matrix_variant(matrix)
    if variant == "dense":
        matrix = np.array(matrix, dtype=np.float64, ndmin=2)
        rows, cols = matrix.shape
    elif variant == "sparse":
        matrix = sp.csr_matrix(matrix, dtype=np.float64)
        rows, cols = matrix.shape
    elif variant == "low-rank":
        left, right = (np.asarray(f, dtype=np.float64) for f in matrix)
        _require(left.shape[1] == right.shape[0], "low-rank factors do not conform")
        matrix = (left, right)
        rows, cols = left.shape[0], right.shape[1]
    else:
        raise ValueError(f"unknown matrix variant {variant!r}")
    _require(
        not x.shape.is_matrix and x.size == cols,
        f"cannot multiply a {rows}x{cols} matrix by {x.shape}",
    )
    return Expr("matmul", (x,), Shape((rows,)), (variant, matrix))


def conv(kernel: Any, x: Expr, variant: str = "column") -> Expr:
    kernel = np.array(kernel, dtype=np.float64, ndmin=1)
    dims, kdims = x.shape.dims, kernel.shape
    _require(len(dims) == len(kdims), f"{kernel.ndim}-D kernel cannot convolve {x.shape}")
    if variant == "column":
        out = tuple(n + p - 1 for n, p in zip(dims, kdims))
    elif variant == "row":
        _require(all(p <= n for n, p in zip(dims, kdims)), "row kernel longer than input")
        out = tuple(n - p + 1 for n, p in zip(dims, kdims))
    elif variant == "circular":
        _require(all(p <= n for n, p in zip(dims, kdims)), "circular kernel longer than input")
        out = dims
    else:
        raise ValueError(f"unknown convolution variant {variant!r}")
    return Expr("conv", (x,), Shape(out), (variant, kernel))


def dft(x: Expr) -> Expr:
    _require(x.shape.rows % 2 == 0, f"dft input needs 2p rows, got {x.shape}")
    return Expr("dft", (x,), x.shape)


def dwt(x: Expr, levels: int | None = None, wavelet: str = "haar") -> Expr:
    n = x.shape.rows
    _require(n & (n - 1) == 0, f"dwt needs a power-of-two length, got {x.shape}")
    _require(not x.shape.is_matrix or x.shape.cols == n, "dwt matrices must be square")
    return Expr("dwt", (x,), x.shape, (levels, wavelet))


def matrix_product(left: Any, x: Expr, right: Any) -> Expr:
    """f(X) = AXB for constant A and B."""
    left = np.array(left, dtype=np.float64, ndmin=2)
    right = np.array(right, dtype=np.float64, ndmin=2)
    s, p = left.shape
    q, t = right.shape
    _require(x.shape.dims == (p, q), f"cannot form A X B with A {left.shape}, X {x.shape}, "
             f"B {right.shape}")
    return Expr("matrix_product", (x,), Shape((s, t)), (left, right))


def vec(x: Expr) -> Expr:
    _require(x.shape.is_matrix, f"vec needs a matrix argument, got {x.shape}")
    return Expr("vec", (x,), Shape((x.size,)))


def mat(x: Expr, rows: int, cols: int) -> Expr:
    _require(
        not x.shape.is_matrix and x.size == rows * cols,
        f"cannot reshape {x.shape} to {rows}x{cols}",
    )
    return Expr("mat", (x,), Shape((rows, cols)), (rows, cols))


def vstack(*args: Expr) -> Expr:
    _require(bool(args), "vstack needs at least one argument")
    return Expr("vstack", tuple(args), Shape((sum(a.size for a in args),)))


def split(x: Expr, shapes: Sequence[ShapeLike]) -> tuple[Expr, ...]:
    """Split a vector into consecutive parts; returns one expression per part."""
    parts = tuple(Shape.of(s) for s in shapes)
    _require(
        not x.shape.is_matrix and sum(p.total for p in parts) == x.size,
        f"parts {[str(p) for p in parts]} do not tile {x.shape}",
    )
    node = Expr("split", (x,), x.shape, parts, out_shapes=parts)
    return tuple(part(node, index) for index in range(len(parts)))


def part(node: Expr, index: int) -> Expr:
    _require(node.op == "split", "only split expressions have parts")
    return Expr("part", (node,), node.out_shapes[index], int(index))


def sum_entries(x: Expr) -> Expr:
    return Expr("sum_entries", (x,), Shape((1,)))


def zero(source: Expr, shape: ShapeLike) -> Expr:
    """The zero map from ``source`` to ``shape``."""
    shape = Shape.of(shape)
    return Expr("zero", (source,), shape, shape)


# ---- nonlinear atoms ----


def sum_squares(x: Expr) -> Expr:
    return Expr("sum_squares", (x,), Shape((1,)))


def norm2(x: Expr) -> Expr:
    return Expr("norm2", (x,), Shape((1,)))


def norm1(x: Expr) -> Expr:
    return Expr("norm1", (x,), Shape((1,)))


def absolute(x: Expr) -> Expr:
    return Expr("abs", (x,), x.shape)


# ---- generic construction ----


def _single(fn: Callable[[Expr], Expr]) -> Callable[[tuple[Expr, ...], Any], Expr]:
    def build(args: tuple[Expr, ...], data: Any) -> Expr:
        _require(len(args) == 1, f"{fn.__name__} takes one argument, got {len(args)}")
        return fn(args[0])

    return build


def _with_data(fn: Callable[..., Expr]) -> Callable[[tuple[Expr, ...], Any], Expr]:
    def build(args: tuple[Expr, ...], data: Any) -> Expr:
        _require(len(args) == 1, f"{fn.__name__} takes one argument, got {len(args)}")
        return fn(args[0], data)

    return build


def _build_split(args: tuple[Expr, ...], data: Any) -> Expr:
    _require(len(args) == 1, "split takes one argument")
    # the split node itself, as shared by its parts
    return split(args[0], data)[0].args[0]


_BUILDERS: dict[str, Callable[[tuple[Expr, ...], Any], Expr]] = {
    "sum": lambda args, data: add(*args),
    "scalar_mult": _with_data(lambda x, alpha: scalar_mult(alpha, x)),
    "matmul": _with_data(lambda x, data: matmul(data[1], x, data[0])),
    "conv": _with_data(lambda x, data: conv(data[1], x, data[0])),
    "dft": _single(dft),
    "dwt": _with_data(lambda x, data: dwt(x, *data)),
    "matrix_product": _with_data(lambda x, data: matrix_product(data[0], x, data[1])),
    "vec": _single(vec),
    "mat": _with_data(lambda x, data: mat(x, *data)),
    "vstack": lambda args, data: vstack(*args),
    "split": _build_split,
    "part": _with_data(part),
    "sum_entries": _single(sum_entries),
    "zero": _with_data(zero),
    "sum_squares": _single(sum_squares),
    "norm2": _single(norm2),
    "norm1": _single(norm1),
    "abs": _single(absolute),
}


def apply_atom(op: str, args: Sequence[Expr], data: Any = None) -> Expr:
    """Apply the atom named ``op``; ``data`` is the atom's parameter payload."""
    try:
        builder = _BUILDERS[op]
    except KeyError:
        raise UnknownAtomError(op) from None
    return builder(tuple(args), data)
