"""Cones of a cone program and Euclidean projections onto them."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from typing import Literal

import numpy as np

ConeKind = Literal["zero", "free", "nonneg", "soc"]
CONE_KINDS: tuple[str, ...] = ("zero", "free", "nonneg", "soc")


class ConeSizeError(ValueError):
    """Raised when a vector does not match the size of the cone it is projected onto."""


@dataclass(frozen=True)
class Cone:
    """One block of K.

    Second-order cone members are laid out as (x, t) with t last: ||x||_2 <= t.
    """

    kind: str
    size: int

    def __post_init__(self) -> None:
        if self.kind not in CONE_KINDS:
            raise ValueError(f"unknown cone kind {self.kind!r}; expected one of {CONE_KINDS}")
        if self.size < 1:
            raise ValueError(f"cone size must be >= 1, got {self.size}")

    def to_dict(self) -> dict[str, object]:
        return {"kind": self.kind, "size": self.size}


def _project_soc(v: np.ndarray, out: np.ndarray) -> None:
    x, t = v[:-1], v[-1]
    norm_x = float(np.linalg.norm(x))
    if norm_x <= t:
        out[:] = v
    elif norm_x <= -t:
        out.fill(0.0)
    else:
        scale = (norm_x + t) / 2.0
        out[:-1] = x * (scale / norm_x)
        out[-1] = scale


def project(cone: Cone, v: np.ndarray) -> np.ndarray:
    """Euclidean projection of ``v`` onto ``cone``."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size != cone.size:
        raise ConeSizeError(f"{cone.kind} cone of size {cone.size} cannot take {v.shape}")
    if cone.kind == "zero":
        return np.zeros_like(v)
    if cone.kind == "free":
        return v.copy()
    if cone.kind == "nonneg":
        return np.maximum(v, 0.0)
    out = np.empty_like(v)
    _project_soc(v, out)
    return out


def project_cones(
    cones: Sequence[Cone], v: np.ndarray, out: np.ndarray | None = None
) -> np.ndarray:
    """Blockwise projection onto the product cone."""
    total = sum(cone.size for cone in cones)
    if v.size != total:
        raise ConeSizeError(f"cones cover {total} entries, vector has {v.size}")
    if out is None:
        out = np.empty_like(v, dtype=np.float64)
    offset = 0
    for cone in cones:
        block = slice(offset, offset + cone.size)
        if cone.kind == "zero":
            out[block] = 0.0
        elif cone.kind == "free":
            out[block] = v[block]
        elif cone.kind == "nonneg":
            np.maximum(v[block], 0.0, out=out[block])
        else:
            _project_soc(v[block], out[block])
        offset += cone.size
    return out


def distance(cones: Sequence[Cone], v: np.ndarray) -> float:
    """Euclidean distance from ``v`` to the product cone."""
    v = np.asarray(v, dtype=np.float64)
    return float(np.linalg.norm(v - project_cones(cones, v)))
