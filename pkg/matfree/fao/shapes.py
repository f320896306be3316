"""Array shapes and the column-major edge-array convention."""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Union

import numpy as np


class DimensionError(ValueError):
    """Raised when an array or shape does not conform to what an operator expects."""


ShapeLike = Union["Shape", int, Sequence[int]]


@dataclass(frozen=True, slots=True)
class Shape:
    """Extents of a vector (one entry) or a matrix (two entries, column-major storage)."""

    dims: tuple[int, ...]

    def __post_init__(self) -> None:
        dims = tuple(int(d) for d in self.dims)
        if not 1 <= len(dims) <= 2:
            raise DimensionError(f"shapes must have one or two extents, got {dims}")
        if any(d < 1 for d in dims):
            raise DimensionError(f"every extent must be >= 1, got {dims}")
        object.__setattr__(self, "dims", dims)

    @classmethod
    def of(cls, value: ShapeLike) -> Shape:
        if isinstance(value, Shape):
            return value
        if isinstance(value, (int, np.integer)):
            return cls((int(value),))
        return cls(tuple(value))

    @property
    def total(self) -> int:
        return math.prod(self.dims)

    @property
    def is_matrix(self) -> bool:
        return len(self.dims) == 2

    @property
    def rows(self) -> int:
        return self.dims[0]

    @property
    def cols(self) -> int:
        return self.dims[1] if self.is_matrix else 1

    def __str__(self) -> str:
        return "x".join(str(d) for d in self.dims)


def as_flat(array: np.ndarray | Sequence[float], shape: Shape, label: str = "input") -> np.ndarray:
    """Return ``array`` as a flat float64 column-major vector conforming to ``shape``.

    Vectors are accepted as 1-D arrays; matrices as 2-D arrays of the exact extents or as
    already-flattened column-major vectors.
    """
    arr = np.asarray(array, dtype=np.float64)
    if arr.ndim == 1 and arr.shape[0] == shape.total:
        return arr
    if arr.ndim == 2 and arr.shape == shape.dims:
        return arr.ravel(order="F")
    if arr.ndim == 0 and shape.total == 1:
        return arr.reshape(1)
    raise DimensionError(f"{label} has shape {arr.shape}, expected {shape}")


def as_shaped(flat: np.ndarray, shape: Shape) -> np.ndarray:
    """View a flat column-major vector with the natural extents of ``shape``."""
    if not shape.is_matrix:
        return flat
    return flat.reshape(shape.dims, order="F")
