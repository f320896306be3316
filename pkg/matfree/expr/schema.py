"""JSON problem files.

A problem file looks like::

    {
      "variables": [{"name": "x", "shape": [8]}],
      "constants": [{"name": "c", "shape": [3], "values": [1, 2, 1]},
                    {"name": "b", "shape": [10], "generator": {"kind": "normal", "seed": 1}}],
      "objective": {"op": "sum_squares", "args": [
          {"op": "sub", "args": [
              {"op": "conv", "args": [{"op": "variable", "data": "x"}],
               "data": {"kernel": "c", "variant": "column"}},
              {"op": "constant", "data": "b"}]}]},
      "constraints": [{"expr": {"op": "variable", "data": "x"}, "cone": "nonneg"}]
    }

Expression nodes are ``{op, args, data}``. Matrix-valued constants are given as nested row
lists or as flat column-major lists.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Literal

import numpy as np
import scipy.sparse as sp
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from ..fao.shapes import Shape
from .expression import (
    Expr,
    apply_atom,
    constant,
    neg,
    part,
    split,
    sub,
    variable,
)
from .problem import Constraint, Opr


class ProblemSchemaError(ValueError):
    """Raised when a problem file is malformed or references unknown names."""


def _shape_list(value: Any) -> list[int]:
    if isinstance(value, int):
        value = [value]
    return list(value)


class VariableSpec(BaseModel):
    name: str = Field(min_length=1)
    shape: list[int]

    @field_validator("shape", mode="before")
    @classmethod
    def _coerce_shape(cls, value: Any) -> list[int]:
        return _shape_list(value)

    @field_validator("shape", mode="after")
    @classmethod
    def _check_shape(cls, value: list[int]) -> list[int]:
        Shape(tuple(value))
        return value


class GeneratorSpec(BaseModel):
    kind: Literal["normal", "uniform", "folded_normal", "ones", "zeros"]
    seed: int = 0
    scale: float = 1.0
    offset: float = 0.0
    low: float = 0.0
    high: float = 1.0


class ConstantSpec(BaseModel):
    name: str = Field(min_length=1)
    shape: list[int]
    values: Any = None
    generator: GeneratorSpec | None = None
    format: Literal["dense", "sparse"] = "dense"

    @field_validator("shape", mode="before")
    @classmethod
    def _coerce_shape(cls, value: Any) -> list[int]:
        return _shape_list(value)

    @model_validator(mode="after")
    def _one_source(self) -> ConstantSpec:
        if (self.values is None) == (self.generator is None):
            raise ValueError(f"constant {self.name!r} needs exactly one of values or generator")
        return self


class ExprSpec(BaseModel):
    op: str
    args: list[ExprSpec] = Field(default_factory=list)
    data: Any = None


class ConstraintSpec(BaseModel):
    expr: ExprSpec
    cone: Literal["zero", "nonneg", "soc"]


class ProblemSpec(BaseModel):
    variables: list[VariableSpec] = Field(default_factory=list)
    constants: list[ConstantSpec] = Field(default_factory=list)
    objective: ExprSpec
    constraints: list[ConstraintSpec] = Field(default_factory=list)
    sense: Literal["minimize"] = "minimize"
    info: dict[str, Any] = Field(default_factory=dict)


ExprSpec.model_rebuild()


# ---- constants ----


def generate_values(spec: GeneratorSpec, dims: tuple[int, ...]) -> np.ndarray:
    rng = np.random.default_rng(spec.seed)
    if spec.kind == "normal":
        return spec.offset + spec.scale * rng.standard_normal(dims)
    if spec.kind == "uniform":
        return rng.uniform(spec.low, spec.high, dims)
    if spec.kind == "folded_normal":
        return spec.offset + spec.scale * np.abs(rng.standard_normal(dims))
    if spec.kind == "ones":
        return np.ones(dims)
    return np.zeros(dims)


def _constant_value(spec: ConstantSpec) -> Any:
    dims = tuple(spec.shape)
    if spec.generator is not None:
        array = generate_values(spec.generator, dims)
    else:
        array = np.asarray(spec.values, dtype=np.float64)
        if array.shape != dims:
            if array.ndim == 1 and array.size == int(np.prod(dims)):
                array = array.reshape(dims, order="F")
            elif array.ndim == 0 and int(np.prod(dims)) == 1:
                array = array.reshape(dims)
            else:
                raise ProblemSchemaError(
                    f"constant {spec.name!r} has {array.shape} values, declared {dims}"
                )
    return sp.csr_matrix(array) if spec.format == "sparse" else array


# ---- loading ----


class _Resolver:
    def __init__(self, spec: ProblemSpec) -> None:
        self.variables = {v.name: variable(v.name, tuple(v.shape)) for v in spec.variables}
        if len(self.variables) != len(spec.variables):
            raise ProblemSchemaError("duplicate variable names")
        self.constants = {c.name: _constant_value(c) for c in spec.constants}
        if len(self.constants) != len(spec.constants):
            raise ProblemSchemaError("duplicate constant names")

    def value(self, name: Any) -> Any:
        if isinstance(name, str):
            if name not in self.constants:
                raise ProblemSchemaError(f"unknown constant {name!r}")
            return self.constants[name]
        return np.asarray(name, dtype=np.float64)

    def dense(self, name: Any) -> np.ndarray:
        value = self.value(name)
        return value.toarray() if sp.issparse(value) else value

    def build(self, node: ExprSpec) -> Expr:
        op, data = node.op, node.data
        if op == "variable":
            if data not in self.variables:
                raise ProblemSchemaError(f"unknown variable {data!r}")
            return self.variables[data]
        if op == "constant":
            return constant(self.dense(data))
        args = [self.build(arg) for arg in node.args]
        if op == "neg":
            return neg(*args)
        if op == "sub":
            return sub(*args)
        if op == "split":
            return split(args[0], [tuple(_shape_list(s)) for s in data["shapes"]])[0].args[0]
        if op == "part":
            return part(args[0], int(data))
        return apply_atom(op, args, self.atom_data(op, data))

    def atom_data(self, op: str, data: Any) -> Any:
        data = data if data is not None else {}
        if op == "scalar_mult":
            return float(data["alpha"] if isinstance(data, dict) else data)
        if op == "matmul":
            if not isinstance(data, dict):
                data = {"matrix": data}
            if data.get("variant") == "low-rank":
                return "low-rank", (self.dense(data["left"]), self.dense(data["right"]))
            matrix = self.value(data["matrix"])
            variant = data.get("variant") or ("sparse" if sp.issparse(matrix) else "dense")
            return variant, matrix
        if op == "conv":
            return data.get("variant", "column"), self.dense(data["kernel"])
        if op == "dwt":
            return data.get("levels"), data.get("wavelet", "haar")
        if op == "matrix_product":
            return self.dense(data["left"]), self.dense(data["right"])
        if op == "mat":
            return int(data["rows"]), int(data["cols"])
        return None


def parse_problem(document: dict[str, Any]) -> Opr:
    """Build an :class:`Opr` from an already-decoded problem document."""
    try:
        spec = ProblemSpec.model_validate(document)
    except ValidationError as exc:
        raise ProblemSchemaError(f"invalid problem document: {exc}") from exc
    try:
        resolver = _Resolver(spec)
        objective = resolver.build(spec.objective)
        constraints = [Constraint(resolver.build(c.expr), c.cone) for c in spec.constraints]
        return Opr(
            objective,
            tuple(constraints),
            tuple(resolver.variables.values()),
            spec.sense,
            dict(spec.info),
        )
    except ProblemSchemaError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ProblemSchemaError(f"cannot build problem: {exc}") from exc


def load_problem(source: str | Path | dict[str, Any]) -> Opr:
    """Load a problem from a JSON file path, a JSON string or a decoded document."""
    if isinstance(source, dict):
        return parse_problem(source)
    text = str(source)
    if isinstance(source, Path) or not text.lstrip().startswith("{"):
        text = Path(source).read_text(encoding="utf-8")
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemSchemaError(f"problem file is not valid JSON: {exc}") from exc
    return parse_problem(document)


# ---- dumping ----


def _jsonable(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


class _Writer:
    def __init__(self) -> None:
        self.constants: list[dict[str, Any]] = []
        self._names: dict[int, str] = {}

    def constant(self, value: Any) -> str:
        key = id(value)
        if key in self._names:
            return self._names[key]
        name = f"c{len(self.constants)}"
        self._names[key] = name
        is_sparse = sp.issparse(value)
        array = value.toarray() if is_sparse else np.asarray(value)
        entry: dict[str, Any] = {
            "name": name,
            "shape": list(array.shape),
            "values": array.tolist(),
        }
        if is_sparse:
            entry["format"] = "sparse"
        self.constants.append(entry)
        return name

    def data(self, node: Expr) -> Any:
        op, data = node.op, node.data
        if op == "scalar_mult":
            return data
        if op == "matmul":
            variant, matrix = data
            if variant == "low-rank":
                left, right = matrix
                return {
                    "variant": variant,
                    "left": self.constant(left),
                    "right": self.constant(right),
                }
            return {"variant": variant, "matrix": self.constant(matrix)}
        if op == "conv":
            return {"variant": data[0], "kernel": self.constant(data[1])}
        if op == "dwt":
            levels, wavelet = data
            if not isinstance(wavelet, str):
                raise ProblemSchemaError("custom wavelet filters cannot be written to JSON")
            return {"levels": levels, "wavelet": wavelet}
        if op == "matrix_product":
            return {"left": self.constant(data[0]), "right": self.constant(data[1])}
        if op == "mat":
            return {"rows": data[0], "cols": data[1]}
        if op == "split":
            return {"shapes": [list(s.dims) for s in data]}
        if op == "part":
            return data
        return None

    def tree(self, node: Expr) -> dict[str, Any]:
        if node.is_variable:
            return {"op": "variable", "data": node.name}
        if node.is_constant:
            return {"op": "constant", "data": self.constant(node.data)}
        if node.op == "zero":
            raise ProblemSchemaError("zero maps are internal and cannot be written to JSON")
        entry: dict[str, Any] = {"op": node.op, "args": [self.tree(arg) for arg in node.args]}
        data = self.data(node)
        if data is not None:
            entry["data"] = data
        return entry


def dump_problem(problem: Opr) -> dict[str, Any]:
    """The JSON document for ``problem``; shared subexpressions are written out per use."""
    writer = _Writer()
    document = {
        "variables": [{"name": v.name, "shape": list(v.shape.dims)} for v in problem.variables],
        "objective": writer.tree(problem.objective),
        "constraints": [
            {"expr": writer.tree(c.expr), "cone": c.cone} for c in problem.constraints
        ],
        "sense": problem.sense,
        "info": _jsonable(problem.info),
    }
    document["constants"] = writer.constants
    return document


def dumps_problem(problem: Opr, **kwargs: Any) -> str:
    return json.dumps(dump_problem(problem), **kwargs)
