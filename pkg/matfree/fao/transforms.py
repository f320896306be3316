"""Fast-transform atoms: real-embedded DFT, 1-D/2-D convolutions and orthogonal DWTs.

Complex data never crosses the public API. The DFT of a complex vector z ∈ C^p is stored as
the real vector (Re z, Im z) ∈ R^{2p}; for matrices the top p rows hold the real part and the
bottom p rows the imaginary part.
"""

from __future__ import annotations

import logging
import math
from typing import Literal

import numpy as np
import scipy.fft
import scipy.signal
import scipy.sparse as sp

from .base import Arrays, Fao
from .shapes import DimensionError, Shape, ShapeLike

logger = logging.getLogger(__name__)

ConvVariant = Literal["column", "row", "circular"]
ConvMethod = Literal["auto", "direct", "fft"]

DEFAULT_DIRECT_KERNEL_MAX = 32

_SQRT2 = math.sqrt(2.0)
_SQRT3 = math.sqrt(3.0)

WAVELET_FILTERS: dict[str, tuple[np.ndarray, np.ndarray]] = {
    "haar": (
        np.array([1.0, 1.0]) / _SQRT2,
        np.array([1.0, -1.0]) / _SQRT2,
    ),
    "daubechies4": (
        np.array([1 + _SQRT3, 3 + _SQRT3, 3 - _SQRT3, 1 - _SQRT3]) / (4 * _SQRT2),
        np.array([1 - _SQRT3, -(3 - _SQRT3), 3 + _SQRT3, -(1 + _SQRT3)]) / (4 * _SQRT2),
    ),
}


class UnsupportedLengthError(ValueError):
    """Raised for transform lengths or level counts the transform cannot handle."""


def next_power_of_two(n: int) -> int:
    return 1 << max(0, int(n) - 1).bit_length()


# ---- DFT ----


class Dft(Fao):
    """Unitary DFT (scale 1/√p) on the real embedding of C^p or C^{p×q}."""

    kind = "dft"
    fast_transform = True

    def __init__(self, shape: ShapeLike) -> None:
        shape = Shape.of(shape)
        if shape.rows % 2:
            raise UnsupportedLengthError(
                f"DFT input needs an even number of rows (2p), got {shape}"
            )
        super().__init__([shape], [shape], shape.dims)
        self.p = shape.rows // 2

    def _transform(self, x: np.ndarray, y: np.ndarray, *, inverse: bool) -> None:
        dims = self.in_shapes[0].dims
        src = x.reshape(dims, order="F")
        dst = y.reshape(dims, order="F")
        z = src[: self.p] + 1j * src[self.p :]
        if len(dims) == 1:
            op = scipy.fft.ifft if inverse else scipy.fft.fft
        else:
            op = scipy.fft.ifft2 if inverse else scipy.fft.fft2
        w = op(z, norm="ortho")
        dst[: self.p] = w.real
        dst[self.p :] = w.imag

    def forward(self, inputs: Arrays, outputs: Arrays, scratch: np.ndarray) -> None:
        self._transform(inputs[0], outputs[0], inverse=False)

    def adjoint(self, inputs: Arrays, outputs: Arrays, scratch: np.ndarray) -> None:
        self._transform(inputs[0], outputs[0], inverse=True)


def make_dft(shape: ShapeLike) -> Fao:
    return Dft(shape)


# ---- Convolution ----


class Convolution(Fao):
    """Column, row or circular convolution with a fixed 1-D or 2-D kernel.

    Column convolution maps x ∈ R^n to c*x ∈ R^{n+p-1}; row convolution keeps the n-p+1 entries
    that do not touch the zero padding; circular convolution wraps indices modulo n. Each
    instance holds its adjoint: Col(c)^T = Row(rev c), Row(c)^T = Col(rev c), and
    Circ(c)^T = Circ(c̃) with c̃ = (c_1, c_n, ..., c_2).

    Small kernels (p <= ``direct_kernel_max`` or p <= log2 n) use the direct sum; otherwise the
    product is formed in the frequency domain, zero-padding linear convolutions to the next
    power of two per axis.
    """

    fast_transform = True

    def __init__(
        self,
        variant: ConvVariant,
        kernel: np.ndarray,
        input_shape: ShapeLike,
        *,
        method: ConvMethod = "auto",
        direct_kernel_max: int = DEFAULT_DIRECT_KERNEL_MAX,
        _dual: Convolution | None = None,
    ) -> None:
        kernel = np.asarray(kernel, dtype=np.float64)
        in_shape = Shape.of(input_shape)
        if kernel.ndim != len(in_shape.dims):
            raise DimensionError(
                f"{kernel.ndim}-D kernel cannot convolve an input of shape {in_shape}"
            )
        kdims, ndims = kernel.shape, in_shape.dims
        if variant == "column":
            out_dims = tuple(n + p - 1 for n, p in zip(ndims, kdims))
        elif variant == "row":
            if any(p > n for n, p in zip(ndims, kdims)):
                raise DimensionError(
                    f"row convolution kernel {kdims} is longer than its input {ndims}"
                )
            out_dims = tuple(n - p + 1 for n, p in zip(ndims, kdims))
        elif variant == "circular":
            if kdims != ndims:
                raise DimensionError(
                    f"circular convolution kernel {kdims} must match the input {ndims}"
                )
            out_dims = ndims
        else:
            raise ValueError(f"unknown convolution variant {variant!r}")

        super().__init__([in_shape], [out_dims], kernel)
        self.variant = variant
        self.kind = f"{variant}_conv"
        self.method = method
        self.direct_kernel_max = direct_kernel_max

        p, n = kernel.size, in_shape.total
        if method == "auto":
            self.direct = p <= direct_kernel_max or p <= math.log2(n)
        else:
            self.direct = method == "direct"
        if variant == "circular":
            self._fft_dims = ndims
        else:
            self._fft_dims = tuple(next_power_of_two(n + p - 1) for n, p in zip(ndims, kdims))
        self._kernel_hat = None if self.direct else scipy.fft.rfftn(kernel, s=self._fft_dims)
        logger.debug(
            "%s kernel=%s input=%s path=%s", self.kind, kdims, ndims,
            "direct" if self.direct else "fft",
        )
        self._dual = _dual if _dual is not None else self._build_dual()

    def _build_dual(self) -> Convolution:
        kernel = self.data
        axes = tuple(range(kernel.ndim))
        if self.variant == "circular":
            dual_kernel = np.roll(np.flip(kernel, axis=axes), 1, axis=axes)
            dual_variant: ConvVariant = "circular"
        else:
            dual_kernel = np.flip(kernel, axis=axes)
            dual_variant = "row" if self.variant == "column" else "column"
        return Convolution(
            dual_variant,
            dual_kernel,
            self.out_shapes[0],
            method=self.method,
            direct_kernel_max=self.direct_kernel_max,
            _dual=self,
        )

    @property
    def _own_scratch(self) -> int:
        if self.direct or self.variant == "circular":
            return 0
        return math.prod(self._fft_dims)

    @property
    def scratch_size(self) -> int:
        return max(self._own_scratch, self._dual._own_scratch)

    def adjoint_fao(self) -> Fao:
        return self._dual

    def forward(self, inputs: Arrays, outputs: Arrays, scratch: np.ndarray) -> None:
        self._convolve(inputs[0], outputs[0], scratch)

    def adjoint(self, inputs: Arrays, outputs: Arrays, scratch: np.ndarray) -> None:
        self._dual._convolve(inputs[0], outputs[0], scratch)

    def _convolve(self, x: np.ndarray, y: np.ndarray, scratch: np.ndarray) -> None:
        kernel = self.data
        in_dims = self.in_shapes[0].dims
        src = x.reshape(in_dims, order="F")
        dst = y.reshape(self.out_shapes[0].dims, order="F")
        if self.direct:
            if self.variant == "circular":
                dst[...] = _circular_direct(kernel, src)
            else:
                mode = "full" if self.variant == "column" else "valid"
                dst[...] = scipy.signal.convolve(src, kernel, mode=mode, method="direct")
            return

        if self.variant == "circular":
            product = scipy.fft.rfftn(src) * self._kernel_hat
            dst[...] = scipy.fft.irfftn(product, s=self._fft_dims)
            return

        padded = scratch[: math.prod(self._fft_dims)].reshape(self._fft_dims, order="F")
        padded.fill(0.0)
        padded[tuple(slice(0, n) for n in in_dims)] = src
        full = scipy.fft.irfftn(scipy.fft.rfftn(padded) * self._kernel_hat, s=self._fft_dims)
        if self.variant == "column":
            window = tuple(slice(0, m) for m in dst.shape)
        else:
            window = tuple(slice(p - 1, p - 1 + m) for p, m in zip(kernel.shape, dst.shape))
        dst[...] = full[window]

    def coefficient(self, i: int = 0, j: int = 0) -> sp.csr_matrix:
        return convolution_matrix(self.variant, self.data, self.in_shapes[0].dims)


def _circular_direct(kernel: np.ndarray, x: np.ndarray) -> np.ndarray:
    axes = tuple(range(x.ndim))
    out = np.zeros_like(x)
    for index in zip(*np.nonzero(kernel)):
        out += kernel[index] * np.roll(x, index, axis=axes)
    return out


def convolution_matrix(
    variant: ConvVariant, kernel: np.ndarray, in_dims: tuple[int, ...]
) -> sp.csr_matrix:
    """Explicit Toeplitz (column/row) or circulant matrix acting on column-major vec(x)."""
    kernel = np.asarray(kernel, dtype=np.float64)
    kdims = kernel.shape
    if variant == "column":
        out_dims = tuple(n + p - 1 for n, p in zip(in_dims, kdims))
    elif variant == "row":
        out_dims = tuple(n - p + 1 for n, p in zip(in_dims, kdims))
    else:
        out_dims = tuple(in_dims)

    k_idx = np.indices(kdims).reshape(len(kdims), -1)
    values = kernel.reshape(-1)
    if variant == "column":
        j_idx = np.indices(in_dims).reshape(len(in_dims), -1)
        rows = [k[:, None] + j[None, :] for k, j in zip(k_idx, j_idx)]
        cols = [np.broadcast_to(j[None, :], rows[0].shape) for j in j_idx]
    else:
        o_idx = np.indices(out_dims).reshape(len(out_dims), -1)
        rows = [np.broadcast_to(o[None, :], (k_idx.shape[1], o.size)) for o in o_idx]
        if variant == "row":
            cols = [o[None, :] + (p - 1) - k[:, None] for o, k, p in zip(o_idx, k_idx, kdims)]
        else:
            cols = [(o[None, :] - k[:, None]) % n for o, k, n in zip(o_idx, k_idx, in_dims)]
    row_index = np.ravel_multi_index(tuple(rows), out_dims, order="F").ravel()
    col_index = np.ravel_multi_index(tuple(cols), tuple(in_dims), order="F").ravel()
    data = np.broadcast_to(values[:, None], rows[0].shape).ravel()
    matrix = sp.csr_matrix(
        (data, (row_index, col_index)),
        shape=(math.prod(out_dims), math.prod(in_dims)),
    )
    matrix.eliminate_zeros()
    return matrix


def make_conv(
    variant: ConvVariant,
    kernel: np.ndarray,
    input_shape: ShapeLike,
    *,
    method: ConvMethod = "auto",
    direct_kernel_max: int = DEFAULT_DIRECT_KERNEL_MAX,
) -> Fao:
    return Convolution(
        variant, kernel, input_shape, method=method, direct_kernel_max=direct_kernel_max
    )


# ---- Discrete wavelet transform ----


def _check_orthonormal(low: np.ndarray, high: np.ndarray, tol: float = 1e-10) -> None:
    q = low.size
    for shift in range(0, q, 2):
        expected = 1.0 if shift == 0 else 0.0
        checks = (
            np.dot(low[: q - shift], low[shift:]),
            np.dot(high[: q - shift], high[shift:]),
        )
        if any(abs(value - expected) > tol for value in checks):
            raise ValueError("wavelet filters are not orthonormal")
        cross = (np.dot(low[: q - shift], high[shift:]), np.dot(high[: q - shift], low[shift:]))
        if any(abs(value) > tol for value in cross):
            raise ValueError("wavelet filters are not orthonormal")


class Dwt(Fao):
    """Multi-level orthogonal DWT with circular boundary handling.

    One stage on a length-N segment v computes approx_i = Σ_l g_l v_{2i+1-l} and
    detail_i = Σ_l h_l v_{2i+1-l} (indices mod N) and stores (approx, detail) in place. The
    cascade repeats on the approximation, so the output reads
    [final approx, coarsest detail, ..., finest detail]. Square matrices use the separable
    pyramid scheme: each stage transforms the columns, then the rows, of the leading block.
    """

    kind = "dwt"
    fast_transform = True

    def __init__(
        self,
        shape: ShapeLike,
        *,
        levels: int | None = None,
        wavelet: str | tuple[np.ndarray, np.ndarray] = "haar",
    ) -> None:
        shape = Shape.of(shape)
        n = shape.rows
        if n & (n - 1) or (shape.is_matrix and shape.cols != n):
            raise UnsupportedLengthError(
                f"DWT needs length 2^p (or a 2^p x 2^p matrix), got {shape}"
            )
        depth = n.bit_length() - 1
        levels = depth if levels is None else int(levels)
        if not 1 <= levels <= depth:
            raise UnsupportedLengthError(f"levels must be in 1..{depth}, got {levels}")
        if isinstance(wavelet, str):
            if wavelet not in WAVELET_FILTERS:
                raise ValueError(f"unknown wavelet {wavelet!r}")
            low, high = WAVELET_FILTERS[wavelet]
        else:
            low, high = (np.asarray(f, dtype=np.float64) for f in wavelet)
            if low.shape != high.shape or low.ndim != 1 or low.size % 2:
                raise ValueError("wavelet filters must be even-length vectors of equal size")
            _check_orthonormal(low, high)
        super().__init__([shape], [shape], (low, high, levels))
        self.levels = levels
        self._lengths = [n >> level for level in range(levels)]
        taps = np.arange(low.size)
        self._index = {
            length: (2 * np.arange(length // 2)[:, None] + 1 - taps[None, :]) % length
            for length in self._lengths
        }

    def _stage(self, block: np.ndarray, axis: int) -> None:
        low, high, _ = self.data
        view = np.moveaxis(block, axis, 0)
        length = view.shape[0]
        gathered = view[self._index[length]]
        approx = np.einsum("iq...,q->i...", gathered, low)
        detail = np.einsum("iq...,q->i...", gathered, high)
        view[: length // 2] = approx
        view[length // 2 :] = detail

    def _inverse_stage(self, block: np.ndarray, axis: int) -> None:
        low, high, _ = self.data
        view = np.moveaxis(block, axis, 0)
        length = view.shape[0]
        half = length // 2
        trailing = (1,) * (view.ndim - 1)
        approx = view[:half, None]
        detail = view[half:, None]
        contributions = approx * low.reshape((1, -1) + trailing)
        contributions = contributions + detail * high.reshape((1, -1) + trailing)
        rebuilt = np.zeros_like(view)
        np.add.at(rebuilt, self._index[length], contributions)
        view[...] = rebuilt

    def forward(self, inputs: Arrays, outputs: Arrays, scratch: np.ndarray) -> None:
        dims = self.in_shapes[0].dims
        y = outputs[0]
        if y is not inputs[0]:
            np.copyto(y, inputs[0])
        grid = y.reshape(dims, order="F")
        for length in self._lengths:
            block = grid[(slice(0, length),) * grid.ndim]
            for axis in range(grid.ndim):
                self._stage(block, axis)

    def adjoint(self, inputs: Arrays, outputs: Arrays, scratch: np.ndarray) -> None:
        dims = self.in_shapes[0].dims
        x = outputs[0]
        if x is not inputs[0]:
            np.copyto(x, inputs[0])
        grid = x.reshape(dims, order="F")
        for length in reversed(self._lengths):
            block = grid[(slice(0, length),) * grid.ndim]
            for axis in reversed(range(grid.ndim)):
                self._inverse_stage(block, axis)


def make_dwt(
    shape: ShapeLike,
    *,
    levels: int | None = None,
    wavelet: str | tuple[np.ndarray, np.ndarray] = "haar",
) -> Fao:
    return Dwt(shape, levels=levels, wavelet=wavelet)
