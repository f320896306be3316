"""Catalog of elementary forward-adjoint oracles.

Matrix multiplications (dense, sparse, low-rank), the sparse triangular solve, the streamed
pseudo-random matrix, and the structural atoms (sum/copy, vstack/split, vec/mat, matrix product)
that glue larger operators together. Fast transforms live in :mod:`matfree.fao.transforms`.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from typing import Any, Literal

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve_triangular

from .base import Arrays, Fao
from .shapes import DimensionError, Shape, ShapeLike

logger = logging.getLogger(__name__)

MatrixVariant = Literal["dense", "sparse", "low-rank"]

DEFAULT_PRNG_BLOCK_ENTRIES = 65536


class SingularMatrixError(ValueError):
    """Raised when a triangular factor has a zero on its diagonal."""


# ---- Scalar and identity-like atoms ----


class ScalarMult(Fao):
    """f(x) = αx; self-adjoint."""

    kind = "scalar_mult"
    in_place = True

    def __init__(self, alpha: float, shape: ShapeLike) -> None:
        super().__init__([shape], [shape], float(alpha))

    @property
    def alpha(self) -> float:
        return self.data

    def forward(self, inputs: Arrays, outputs: Arrays, scratch: np.ndarray) -> None:
        np.multiply(inputs[0], self.data, out=outputs[0])

    adjoint = forward

    def adjoint_fao(self) -> Fao:
        return self

    def coefficient(self, i: int = 0, j: int = 0) -> sp.csr_matrix:
        return self.data * sp.identity(self.in_shapes[0].total, format="csr")


class Identity(Fao):
    kind = "identity"
    in_place = True

    def __init__(self, shape: ShapeLike) -> None:
        super().__init__([shape], [shape])

    def forward(self, inputs: Arrays, outputs: Arrays, scratch: np.ndarray) -> None:
        if outputs[0] is not inputs[0]:
            np.copyto(outputs[0], inputs[0])

    adjoint = forward

    def adjoint_fao(self) -> Fao:
        return self

    def coefficient(self, i: int = 0, j: int = 0) -> sp.csr_matrix:
        return sp.identity(self.in_shapes[0].total, format="csr")


class ZeroMap(Fao):
    """Maps every input to the zero array of ``out_shape``."""

    kind = "zero"

    def __init__(self, in_shape: ShapeLike, out_shape: ShapeLike) -> None:
        super().__init__([in_shape], [out_shape])

    def forward(self, inputs: Arrays, outputs: Arrays, scratch: np.ndarray) -> None:
        outputs[0].fill(0.0)

    adjoint = forward

    def adjoint_fao(self) -> Fao:
        return ZeroMap(self.out_shapes[0], self.in_shapes[0])

    def coefficient(self, i: int = 0, j: int = 0) -> sp.csr_matrix:
        return sp.csr_matrix((self.out_shapes[0].total, self.in_shapes[0].total))


class SumEntries(Fao):
    """f(x) = Σ_i x_i as a length-one vector."""

    kind = "sum_entries"

    def __init__(self, shape: ShapeLike) -> None:
        super().__init__([shape], [1])

    def forward(self, inputs: Arrays, outputs: Arrays, scratch: np.ndarray) -> None:
        outputs[0][0] = inputs[0].sum()

    def adjoint(self, inputs: Arrays, outputs: Arrays, scratch: np.ndarray) -> None:
        outputs[0].fill(inputs[0][0])

    def coefficient(self, i: int = 0, j: int = 0) -> sp.csr_matrix:
        return sp.csr_matrix(np.ones((1, self.in_shapes[0].total)))


# ---- Matrix multiplication ----


class DenseMatrix(Fao):
    kind = "dense"

    def __init__(self, matrix: np.ndarray) -> None:
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2:
            raise DimensionError(f"dense matrix must be 2-D, got ndim={matrix.ndim}")
        m, n = matrix.shape
        super().__init__([n], [m], matrix)

    def forward(self, inputs: Arrays, outputs: Arrays, scratch: np.ndarray) -> None:
        np.matmul(self.data, inputs[0], out=outputs[0])

    def adjoint(self, inputs: Arrays, outputs: Arrays, scratch: np.ndarray) -> None:
        np.matmul(self.data.T, inputs[0], out=outputs[0])

    def coefficient(self, i: int = 0, j: int = 0) -> sp.csr_matrix:
        return sp.csr_matrix(self.data)


class SparseMatrix(Fao):
    """Multiplication by a matrix held in compressed sparse row format.

    ``in_shape``/``out_shape`` let the same matrix act on vec(X) for a matrix argument.
    """

    kind = "sparse"

    def __init__(
        self,
        matrix: Any,
        *,
        shape: tuple[int, int] | None = None,
        in_shape: ShapeLike | None = None,
        out_shape: ShapeLike | None = None,
    ) -> None:
        csr = _to_csr(matrix, shape)
        m, n = csr.shape
        in_shape = Shape.of(in_shape) if in_shape is not None else Shape((n,))
        out_shape = Shape.of(out_shape) if out_shape is not None else Shape((m,))
        if in_shape.total != n or out_shape.total != m:
            raise DimensionError(
                f"sparse matrix {m}x{n} cannot map {in_shape} to {out_shape}"
            )
        super().__init__([in_shape], [out_shape], csr)
        self._transpose = csr.T.tocsr()

    def forward(self, inputs: Arrays, outputs: Arrays, scratch: np.ndarray) -> None:
        outputs[0][:] = self.data @ inputs[0]

    def adjoint(self, inputs: Arrays, outputs: Arrays, scratch: np.ndarray) -> None:
        outputs[0][:] = self._transpose @ inputs[0]

    def coefficient(self, i: int = 0, j: int = 0) -> sp.csr_matrix:
        return self.data.copy()


class LowRankMatrix(Fao):
    """A = BC applied as C then B; the adjoint applies B^T then C^T."""

    kind = "low_rank"

    def __init__(self, left: np.ndarray, right: np.ndarray) -> None:
        left = np.asarray(left, dtype=np.float64)
        right = np.asarray(right, dtype=np.float64)
        if left.ndim != 2 or right.ndim != 2 or left.shape[1] != right.shape[0]:
            raise DimensionError(
                f"inconsistent low-rank factors {left.shape} and {right.shape}"
            )
        super().__init__([right.shape[1]], [left.shape[0]], (left, right))
        self.rank = left.shape[1]

    @property
    def scratch_size(self) -> int:
        return self.rank

    def forward(self, inputs: Arrays, outputs: Arrays, scratch: np.ndarray) -> None:
        left, right = self.data
        inner = scratch[: self.rank]
        np.matmul(right, inputs[0], out=inner)
        np.matmul(left, inner, out=outputs[0])

    def adjoint(self, inputs: Arrays, outputs: Arrays, scratch: np.ndarray) -> None:
        left, right = self.data
        inner = scratch[: self.rank]
        np.matmul(left.T, inputs[0], out=inner)
        np.matmul(right.T, inner, out=outputs[0])

    def coefficient(self, i: int = 0, j: int = 0) -> sp.csr_matrix:
        left, right = self.data
        return sp.csr_matrix(left @ right)


def make_matrix_mult(variant: MatrixVariant, data: Any, **kwargs: Any) -> Fao:
    """Build a matrix multiplication atom.

    ``dense`` takes a full matrix, ``sparse`` a scipy sparse matrix or a
    ``(values, rows, cols)`` triplet plus ``shape=``, ``low-rank`` a ``(B, C)`` factor pair.
    """
    if variant == "dense":
        return DenseMatrix(data)
    if variant == "sparse":
        return SparseMatrix(data, **kwargs)
    if variant == "low-rank":
        left, right = data
        return LowRankMatrix(left, right)
    raise ValueError(f"unknown matrix variant {variant!r}")


def _to_csr(matrix: Any, shape: tuple[int, int] | None) -> sp.csr_matrix:
    if sp.issparse(matrix):
        return sp.csr_matrix(matrix, dtype=np.float64)
    if isinstance(matrix, tuple) and len(matrix) == 3:
        if shape is None:
            raise DimensionError("triplet form needs an explicit shape")
        values, rows, cols = matrix
        return sp.csr_matrix((values, (rows, cols)), shape=shape, dtype=np.float64)
    return sp.csr_matrix(np.asarray(matrix, dtype=np.float64))


# ---- Triangular solve ----


class TriangularSolve(Fao):
    """f(x) = L^{-1}x by forward substitution; the adjoint is back substitution with L^T."""

    kind = "tri_solve"

    def __init__(self, lower: Any) -> None:
        csr = _to_csr(lower, None)
        m, n = csr.shape
        if m != n:
            raise DimensionError(f"triangular factor must be square, got {m}x{n}")
        if sp.triu(csr, k=1).nnz:
            raise ValueError("triangular factor has entries above the diagonal")
        zero_rows = np.flatnonzero(csr.diagonal() == 0)
        if zero_rows.size:
            raise SingularMatrixError(f"zero diagonal entry in row {int(zero_rows[0])}")
        super().__init__([n], [n], csr)
        self._upper = csr.T.tocsr()

    def forward(self, inputs: Arrays, outputs: Arrays, scratch: np.ndarray) -> None:
        outputs[0][:] = spsolve_triangular(self.data, inputs[0], lower=True)

    def adjoint(self, inputs: Arrays, outputs: Arrays, scratch: np.ndarray) -> None:
        outputs[0][:] = spsolve_triangular(self._upper, inputs[0], lower=False)

    def coefficient(self, i: int = 0, j: int = 0) -> sp.csr_matrix:
        n = self.in_shapes[0].total
        return sp.csr_matrix(spsolve_triangular(self.data, np.eye(n), lower=True))


def make_tri_solve(lower: Any) -> Fao:
    return TriangularSolve(lower)


# ---- Pseudo-random matrix ----


class PrngMatrix(Fao):
    """Multiplication by an m×n matrix with uniform(−1, 1) entries regenerated on the fly.

    Entries come from a Philox counter-based generator keyed by ``seed``; the raw 64-bit words
    are consumed in column-major order and mapped to (−1, 1) through their top 53 bits. The
    matrix is streamed in column blocks and never stored.
    """

    kind = "prng"

    def __init__(
        self, seed: int, m: int, n: int, *, block_entries: int = DEFAULT_PRNG_BLOCK_ENTRIES
    ) -> None:
        super().__init__([n], [m], int(seed))
        self.block_cols = max(1, min(n, block_entries // max(m, 1)))
        logger.debug("prng matrix %dx%d streamed in blocks of %d columns", m, n, self.block_cols)

    @property
    def scratch_size(self) -> int:
        return self.out_shapes[0].total * self.block_cols

    def _blocks(self, scratch: np.ndarray):
        m = self.out_shapes[0].total
        n = self.in_shapes[0].total
        bitgen = np.random.Philox(key=self.data)
        for start in range(0, n, self.block_cols):
            stop = min(n, start + self.block_cols)
            count = m * (stop - start)
            raw = bitgen.random_raw(count)
            block = scratch[:count]
            np.multiply(raw >> np.uint64(11), 2.0**-52, out=block)
            block -= 1.0
            yield start, stop, block.reshape((m, stop - start), order="F")

    def forward(self, inputs: Arrays, outputs: Arrays, scratch: np.ndarray) -> None:
        y = outputs[0]
        y.fill(0.0)
        for start, stop, block in self._blocks(scratch):
            y += block @ inputs[0][start:stop]

    def adjoint(self, inputs: Arrays, outputs: Arrays, scratch: np.ndarray) -> None:
        x = outputs[0]
        for start, stop, block in self._blocks(scratch):
            np.matmul(block.T, inputs[0], out=x[start:stop])

    def to_dense(self) -> np.ndarray:
        """Materialize the matrix from the same stream (tests and coefficients only)."""
        m = self.out_shapes[0].total
        n = self.in_shapes[0].total
        dense = np.empty((m, n))
        scratch = np.empty(self.scratch_size)
        for start, stop, block in self._blocks(scratch):
            dense[:, start:stop] = block
        return dense

    def coefficient(self, i: int = 0, j: int = 0) -> sp.csr_matrix:
        return sp.csr_matrix(self.to_dense())


def make_prng_matrix(
    seed: int, m: int, n: int, *, block_entries: int = DEFAULT_PRNG_BLOCK_ENTRIES
) -> Fao:
    return PrngMatrix(seed, m, n, block_entries=block_entries)


# ---- Sum / copy ----


class Sum(Fao):
    """f(x_1, ..., x_k) = x_1 + ... + x_k."""

    kind = "sum"

    def __init__(self, k: int, shape: ShapeLike) -> None:
        if k < 1:
            raise ValueError(f"sum needs k >= 1, got {k}")
        super().__init__([shape] * k, [shape], k)
        self.in_place = k == 1

    def forward(self, inputs: Arrays, outputs: Arrays, scratch: np.ndarray) -> None:
        y = outputs[0]
        if y is not inputs[0]:
            np.copyto(y, inputs[0])
        for x in inputs[1:]:
            y += x

    def adjoint(self, inputs: Arrays, outputs: Arrays, scratch: np.ndarray) -> None:
        for x in outputs:
            if x is not inputs[0]:
                np.copyto(x, inputs[0])

    def adjoint_fao(self) -> Fao:
        return Copy(self.data, self.out_shapes[0])

    def coefficient(self, i: int = 0, j: int = 0) -> sp.csr_matrix:
        return sp.identity(self.out_shapes[0].total, format="csr")


class Copy(Fao):
    """Outputs k copies of its input."""

    kind = "copy"

    def __init__(self, k: int, shape: ShapeLike) -> None:
        if k < 1:
            raise ValueError(f"copy needs k >= 1, got {k}")
        super().__init__([shape], [shape] * k, k)
        self.in_place = k == 1

    forward = Sum.adjoint
    adjoint = Sum.forward

    def adjoint_fao(self) -> Fao:
        return Sum(self.data, self.in_shapes[0])

    def coefficient(self, i: int = 0, j: int = 0) -> sp.csr_matrix:
        return sp.identity(self.in_shapes[0].total, format="csr")


def make_sum(k: int, m: ShapeLike) -> Fao:
    return Sum(k, m)


def make_copy(k: int, m: ShapeLike) -> Fao:
    return Copy(k, m)


# ---- vstack / split ----


def _segment_layout(
    shapes: Sequence[ShapeLike], offsets: Sequence[int] | None, total: int | None
) -> tuple[tuple[Shape, ...], tuple[int, ...], int]:
    parts = tuple(Shape.of(s) for s in shapes)
    if not parts:
        raise ValueError("vstack/split need at least one part")
    if offsets is None:
        starts = np.concatenate([[0], np.cumsum([p.total for p in parts])[:-1]]).astype(int)
        offsets = tuple(int(o) for o in starts)
    offsets = tuple(int(o) for o in offsets)
    if len(offsets) != len(parts):
        raise DimensionError("one offset per part is required")
    end = max(o + p.total for o, p in zip(offsets, parts))
    total = end if total is None else int(total)
    if total < end or min(offsets) < 0:
        raise DimensionError(f"parts do not fit into length {total}")
    spans = sorted((o, o + p.total) for o, p in zip(offsets, parts))
    if any(spans[k][1] > spans[k + 1][0] for k in range(len(spans) - 1)):
        raise DimensionError("vstack/split parts overlap")
    return parts, offsets, total


class VStack(Fao):
    """Concatenates its inputs (each flattened column-major) into one vector.

    Inputs are placed at ``offsets``; uncovered entries of the output are zero.
    """

    kind = "vstack"

    def __init__(
        self,
        shapes: Sequence[ShapeLike],
        *,
        offsets: Sequence[int] | None = None,
        total: int | None = None,
    ) -> None:
        parts, offsets, total = _segment_layout(shapes, offsets, total)
        super().__init__(parts, [total], offsets)
        self.total = total
        self.contiguous = sum(p.total for p in parts) == total
        self.in_place = len(parts) == 1 and self.contiguous

    @property
    def offsets(self) -> tuple[int, ...]:
        return self.data

    def segments(self) -> list[tuple[int, int]]:
        return [(o, o + s.total) for o, s in zip(self.data, self.in_shapes)]

    def forward(self, inputs: Arrays, outputs: Arrays, scratch: np.ndarray) -> None:
        y = outputs[0]
        if not self.contiguous:
            y.fill(0.0)
        for (lo, hi), x in zip(self.segments(), inputs):
            y[lo:hi] = x

    def adjoint(self, inputs: Arrays, outputs: Arrays, scratch: np.ndarray) -> None:
        u = inputs[0]
        for (lo, hi), x in zip(self.segments(), outputs):
            x[:] = u[lo:hi]

    def adjoint_fao(self) -> Fao:
        return Split(self.in_shapes, offsets=self.data, total=self.total)

    def coefficient(self, i: int = 0, j: int = 0) -> sp.csr_matrix:
        return _selection(self.data[i], self.in_shapes[i].total, self.total)


class Split(Fao):
    """Splits a vector into parts; the adjoint of :class:`VStack` with the same layout."""

    kind = "split"

    def __init__(
        self,
        shapes: Sequence[ShapeLike],
        *,
        offsets: Sequence[int] | None = None,
        total: int | None = None,
    ) -> None:
        parts, offsets, total = _segment_layout(shapes, offsets, total)
        super().__init__([total], parts, offsets)
        self.total = total
        self.contiguous = sum(p.total for p in parts) == total
        self.in_place = len(parts) == 1 and self.contiguous

    @property
    def offsets(self) -> tuple[int, ...]:
        return self.data

    def segments(self) -> list[tuple[int, int]]:
        return [(o, o + s.total) for o, s in zip(self.data, self.out_shapes)]

    forward = VStack.adjoint
    adjoint = VStack.forward

    def adjoint_fao(self) -> Fao:
        return VStack(self.out_shapes, offsets=self.data, total=self.total)

    def coefficient(self, i: int = 0, j: int = 0) -> sp.csr_matrix:
        return _selection(self.data[j], self.out_shapes[j].total, self.total).T.tocsr()


def _selection(offset: int, length: int, total: int) -> sp.csr_matrix:
    rows = np.arange(offset, offset + length)
    cols = np.arange(length)
    return sp.csr_matrix((np.ones(length), (rows, cols)), shape=(total, length))


def make_vstack(shapes: Sequence[ShapeLike]) -> Fao:
    return VStack(shapes)


def make_split(shapes: Sequence[ShapeLike]) -> Fao:
    return Split(shapes)


# ---- Matrix-argument atoms ----


class Vec(Fao):
    """Stacks the columns of a p×q matrix; storage is already column-major so data is unchanged."""

    kind = "vec"
    in_place = True

    def __init__(self, p: int, q: int) -> None:
        super().__init__([(p, q)], [p * q], (int(p), int(q)))

    def forward(self, inputs: Arrays, outputs: Arrays, scratch: np.ndarray) -> None:
        if outputs[0] is not inputs[0]:
            np.copyto(outputs[0], inputs[0])

    adjoint = forward

    def adjoint_fao(self) -> Fao:
        return Mat(*self.data)

    def coefficient(self, i: int = 0, j: int = 0) -> sp.csr_matrix:
        return sp.identity(self.in_shapes[0].total, format="csr")


class Mat(Vec):
    """Inverse of :class:`Vec`: reads a length-pq vector as a p×q matrix."""

    kind = "mat"

    def __init__(self, p: int, q: int) -> None:
        Fao.__init__(self, [p * q], [(p, q)], (int(p), int(q)))

    def adjoint_fao(self) -> Fao:
        return Vec(*self.data)


def make_vec_mat(p: int, q: int) -> Fao:
    """Return the vec atom; its adjoint (``adjoint_fao()``) is mat."""
    return Vec(p, q)


class MatrixProduct(Fao):
    """f(X) = AXB with A s×p and B q×t; the adjoint is U ↦ A^T U B^T."""

    kind = "matrix_product"

    def __init__(self, left: np.ndarray, right: np.ndarray) -> None:
        left = np.asarray(left, dtype=np.float64)
        right = np.asarray(right, dtype=np.float64)
        if left.ndim != 2 or right.ndim != 2:
            raise DimensionError("matrix product factors must be 2-D")
        s, p = left.shape
        q, t = right.shape
        super().__init__([(p, q)], [(s, t)], (left, right))
        self.dims = (s, p, q, t)
        # multiply A first when 1/t + 1/p < 1/s + 1/q
        self.left_first = 1 / t + 1 / p < 1 / s + 1 / q
        # adjoint: A^T first when 1/q + 1/s < 1/p + 1/t
        self.adjoint_left_first = 1 / q + 1 / s < 1 / p + 1 / t

    @property
    def scratch_size(self) -> int:
        s, p, q, t = self.dims
        return max(s * q, p * t)

    def forward(self, inputs: Arrays, outputs: Arrays, scratch: np.ndarray) -> None:
        left, right = self.data
        s, p, q, t = self.dims
        x = inputs[0].reshape((p, q), order="F")
        y = outputs[0].reshape((s, t), order="F")
        if self.left_first:
            inner = scratch[: s * q].reshape((s, q), order="F")
            np.matmul(left, x, out=inner)
            np.matmul(inner, right, out=y)
        else:
            inner = scratch[: p * t].reshape((p, t), order="F")
            np.matmul(x, right, out=inner)
            np.matmul(left, inner, out=y)

    def adjoint(self, inputs: Arrays, outputs: Arrays, scratch: np.ndarray) -> None:
        left, right = self.data
        s, p, q, t = self.dims
        u = inputs[0].reshape((s, t), order="F")
        x = outputs[0].reshape((p, q), order="F")
        if self.adjoint_left_first:
            inner = scratch[: p * t].reshape((p, t), order="F")
            np.matmul(left.T, u, out=inner)
            np.matmul(inner, right.T, out=x)
        else:
            inner = scratch[: s * q].reshape((s, q), order="F")
            np.matmul(u, right.T, out=inner)
            np.matmul(left.T, inner, out=x)

    def coefficient(self, i: int = 0, j: int = 0) -> sp.csr_matrix:
        left, right = self.data
        return sp.kron(sp.csr_matrix(right.T), sp.csr_matrix(left), format="csr")


def make_matrix_product(left: np.ndarray, right: np.ndarray) -> Fao:
    return MatrixProduct(left, right)
