"""Forward-adjoint oracle interface.

A forward-adjoint oracle (FAO) packages a linear function together with an algorithm for
evaluating it and an algorithm for evaluating its adjoint. Implementations read flat float64
column-major input arrays and write into caller-provided output arrays, using only the scratch
workspace they declare.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from collections.abc import Sequence
from typing import Any, ClassVar

import numpy as np
import scipy.sparse as sp

from .shapes import DimensionError, Shape, ShapeLike, as_flat, as_shaped

Arrays = Sequence[np.ndarray]


class Fao(ABC):
    """Base class for every linear atom."""

    kind: str = "fao"
    # True when the output may be written over the input buffer
    in_place: bool = False
    # Convolutions, DFTs and DWTs; canonicalization must never expand these
    fast_transform: ClassVar[bool] = False

    def __init__(
        self,
        in_shapes: Sequence[ShapeLike],
        out_shapes: Sequence[ShapeLike],
        data: Any = None,
    ) -> None:
        self.in_shapes: tuple[Shape, ...] = tuple(Shape.of(s) for s in in_shapes)
        self.out_shapes: tuple[Shape, ...] = tuple(Shape.of(s) for s in out_shapes)
        if not self.in_shapes or not self.out_shapes:
            raise DimensionError(f"{type(self).__name__} needs at least one input and output")
        self.data = data

    @property
    def scratch_size(self) -> int:
        """Number of float64 workspace entries needed by forward and adjoint."""
        return 0

    @property
    def scratch_bytes(self) -> int:
        return self.scratch_size * np.dtype(np.float64).itemsize

    @abstractmethod
    def forward(self, inputs: Arrays, outputs: Arrays, scratch: np.ndarray) -> None:
        """Write f(inputs) into ``outputs``."""

    @abstractmethod
    def adjoint(self, inputs: Arrays, outputs: Arrays, scratch: np.ndarray) -> None:
        """Write f*(inputs) into ``outputs``; ``inputs`` conform to ``out_shapes``."""

    def adjoint_fao(self) -> Fao:
        """Return the oracle (f*, adjoint, forward)."""
        return AdjointFao(self)

    def coefficient(self, i: int = 0, j: int = 0) -> sp.csr_matrix:
        """Sparse matrix D with D·vec(input i) = vec(output j) when other inputs are zero."""
        return _coefficient_by_unit_vectors(self, i, j)

    def same_as(self, other: Fao) -> bool:
        """True when both oracles compute the same function from the same data."""
        return (
            type(self) is type(other)
            and self.kind == other.kind
            and self.in_shapes == other.in_shapes
            and self.out_shapes == other.out_shapes
            and same_data(self.data, other.data)
        )

    def signature(self) -> tuple[Any, ...]:
        return (self.kind, self.in_shapes, self.out_shapes)

    def __repr__(self) -> str:
        ins = ",".join(str(s) for s in self.in_shapes)
        outs = ",".join(str(s) for s in self.out_shapes)
        return f"<{type(self).__name__} {self.kind} ({ins})->({outs})>"


class AdjointFao(Fao):
    """The oracle of f* built from the oracle of f by swapping its algorithms."""

    def __init__(self, base: Fao) -> None:
        super().__init__(base.out_shapes, base.in_shapes, base.data)
        self.base = base
        self.kind = f"{base.kind}^T"
        self.in_place = base.in_place

    @property
    def scratch_size(self) -> int:
        return self.base.scratch_size

    def forward(self, inputs: Arrays, outputs: Arrays, scratch: np.ndarray) -> None:
        self.base.adjoint(inputs, outputs, scratch)

    def adjoint(self, inputs: Arrays, outputs: Arrays, scratch: np.ndarray) -> None:
        self.base.forward(inputs, outputs, scratch)

    def adjoint_fao(self) -> Fao:
        return self.base

    def coefficient(self, i: int = 0, j: int = 0) -> sp.csr_matrix:
        return self.base.coefficient(j, i).T.tocsr()

    def same_as(self, other: Fao) -> bool:
        return isinstance(other, AdjointFao) and self.base.same_as(other.base)


def same_data(left: Any, right: Any) -> bool:
    """Structural equality for atom payloads (scalars, arrays, sparse matrices, tuples)."""
    if left is right:
        return True
    if isinstance(left, np.ndarray) or isinstance(right, np.ndarray):
        return (
            isinstance(left, np.ndarray)
            and isinstance(right, np.ndarray)
            and left.shape == right.shape
            and bool(np.array_equal(left, right))
        )
    if sp.issparse(left) or sp.issparse(right):
        return (
            sp.issparse(left)
            and sp.issparse(right)
            and left.shape == right.shape
            and (left != right).nnz == 0
        )
    if isinstance(left, (tuple, list)) and isinstance(right, (tuple, list)):
        return len(left) == len(right) and all(same_data(a, b) for a, b in zip(left, right))
    return bool(left == right)


def workspace(fao: Fao, scratch: np.ndarray | None) -> np.ndarray:
    """Return a scratch array large enough for ``fao``, allocating one when none is given."""
    if scratch is None:
        return np.empty(fao.scratch_size, dtype=np.float64)
    if scratch.size < fao.scratch_size:
        raise DimensionError(
            f"{fao.kind} needs {fao.scratch_size} scratch entries, got {scratch.size}"
        )
    return scratch


def _apply(
    fao: Fao,
    inputs: Sequence[Any],
    scratch: np.ndarray | None,
    *,
    transpose: bool,
) -> list[np.ndarray]:
    in_shapes = fao.out_shapes if transpose else fao.in_shapes
    out_shapes = fao.in_shapes if transpose else fao.out_shapes
    if len(inputs) != len(in_shapes):
        raise DimensionError(f"{fao.kind} takes {len(in_shapes)} inputs, got {len(inputs)}")
    xs = [
        as_flat(x, s, label=f"{fao.kind} input {k}")
        for k, (x, s) in enumerate(zip(inputs, in_shapes))
    ]
    ys = [np.empty(s.total, dtype=np.float64) for s in out_shapes]
    work = workspace(fao, scratch)
    if transpose:
        fao.adjoint(xs, ys, work)
    else:
        fao.forward(xs, ys, work)
    return [as_shaped(y, s) for y, s in zip(ys, out_shapes)]


def apply_forward(
    fao: Fao, inputs: Sequence[Any], scratch: np.ndarray | None = None
) -> list[np.ndarray]:
    """Evaluate f on ``inputs`` and return freshly allocated outputs."""
    return _apply(fao, inputs, scratch, transpose=False)


def apply_adjoint(
    fao: Fao, inputs: Sequence[Any], scratch: np.ndarray | None = None
) -> list[np.ndarray]:
    """Evaluate f* on ``inputs`` (conforming to ``out_shapes``)."""
    return _apply(fao, inputs, scratch, transpose=True)


def _coefficient_by_unit_vectors(fao: Fao, i: int, j: int) -> sp.csr_matrix:
    n_in = fao.in_shapes[i].total
    columns: list[np.ndarray] = []
    scratch = np.empty(fao.scratch_size, dtype=np.float64)
    xs = [np.zeros(s.total) for s in fao.in_shapes]
    ys = [np.empty(s.total) for s in fao.out_shapes]
    for k in range(n_in):
        xs[i][k] = 1.0
        fao.forward(xs, ys, scratch)
        columns.append(ys[j].copy())
        xs[i][k] = 0.0
    dense = np.column_stack(columns)
    dense[np.abs(dense) < 1e-14 * max(1.0, float(np.abs(dense).max(initial=0.0)))] = 0.0
    return sp.csr_matrix(dense)
