"""Turning linear expressions into one FAO DAG over the stacked variable vector.

The dag's start node splits x into one part per used variable (unused variables leave gaps in
the split layout). Each variable occurrence becomes an identity node (a mat node for matrix
variables), every output read more than once is duplicated by a copy node, and the end node
stacks the expression values (matrix values vec'd) into one vector.
"""

from __future__ import annotations

from collections import Counter
from collections.abc import Mapping, Sequence
from typing import Union

from ..expr.expression import Expr, topological
from ..fao.atoms import Copy, Identity, Mat, Split, Vec, VStack
from ..fao.base import Fao
from ..fao.dag import FaoDag, ensure_valid
from ..fao.shapes import Shape, ShapeLike
from .affine import CanonicalizationError, linear_fao, require_linear

VarOrder = Union[Mapping[str, ShapeLike], Sequence[Expr]]

# (expression node id, output port)
Outlet = tuple[int, int]


def variable_layout(var_order: VarOrder) -> dict[str, tuple[int, Shape]]:
    """Offset and shape of each variable in x, in order."""
    if isinstance(var_order, Mapping):
        items = [(name, Shape.of(shape)) for name, shape in var_order.items()]
    else:
        items = [(v.name, v.shape) for v in var_order]
    layout: dict[str, tuple[int, Shape]] = {}
    offset = 0
    for name, shape in items:
        if name in layout:
            raise CanonicalizationError(f"variable {name!r} ordered twice")
        layout[name] = (offset, shape)
        offset += shape.total
    return layout


def check_linear(exprs: Sequence[Expr], layout: Mapping[str, tuple[int, Shape]]) -> None:
    if not exprs:
        raise CanonicalizationError("need at least one expression")
    require_linear(exprs, allow_constants=False)
    for node in topological(*exprs):
        if node.is_variable:
            if node.name not in layout:
                raise CanonicalizationError(f"variable {node.name!r} is not ordered")
            if layout[node.name][1] != node.shape:
                raise CanonicalizationError(
                    f"variable {node.name!r} ordered as {layout[node.name][1]}, used as "
                    f"{node.shape}"
                )
    for expr in exprs:
        if expr.op == "split":
            raise CanonicalizationError("expressions must end in a single output")


def _source(arg: Expr) -> Outlet:
    if arg.op == "part":
        return arg.args[0].id, arg.data
    return arg.id, 0


class _Builder:
    def __init__(self, exprs: Sequence[Expr]) -> None:
        self.dag = FaoDag()
        self.nodes = [node for node in topological(*exprs) if node.op != "part"]
        self.uses: Counter[Outlet] = Counter()
        for node in self.nodes:
            for arg in node.args:
                self.uses[_source(arg)] += 1
        for expr in exprs:
            self.uses[_source(expr)] += 1
        # dag (node, port) pairs not yet connected, per expression output
        self.free: dict[Outlet, list[tuple[int, int]]] = {}

    def provide(self, outlet: Outlet, dag_node: int, port: int, shape: Shape) -> None:
        count = self.uses[outlet]
        if count > 1:
            copy = self.dag.add_node(Copy(count, shape))
            self.dag.connect(dag_node, port, copy, 0)
            self.free[outlet] = [(copy, k) for k in range(count)]
        else:
            self.free[outlet] = [(dag_node, port)]

    def take(self, outlet: Outlet) -> tuple[int, int]:
        return self.free[outlet].pop(0)


def graph_repr(exprs: Sequence[Expr], var_order: VarOrder) -> FaoDag:
    """FAO DAG mapping x (variables stacked in ``var_order``) to vstack of ``exprs``."""
    layout = variable_layout(var_order)
    check_linear(exprs, layout)
    builder = _Builder(exprs)
    dag = builder.dag
    n = sum(shape.total for _, shape in layout.values())

    occurrences: dict[str, list[Expr]] = {}
    for node in builder.nodes:
        if node.is_variable:
            occurrences.setdefault(node.name, []).append(node)
    used = [name for name in layout if name in occurrences]
    if not used:
        raise CanonicalizationError("expressions do not depend on any variable")

    start = dag.add_node(
        Split(
            [layout[name][1].total for name in used],
            offsets=[layout[name][0] for name in used],
            total=n,
        )
    )
    for port, name in enumerate(used):
        shape = layout[name][1]
        nodes = occurrences[name]
        if len(nodes) > 1:
            copy = dag.add_node(Copy(len(nodes), shape.total))
            dag.connect(start, port, copy, 0)
            feeds = [(copy, k) for k in range(len(nodes))]
        else:
            feeds = [(start, port)]
        for (src, src_port), node in zip(feeds, nodes):
            reader = Mat(*shape.dims) if shape.is_matrix else Identity(shape)
            node_id = dag.add_node(reader)
            dag.connect(src, src_port, node_id, 0)
            builder.provide((node.id, 0), node_id, 0, shape)

    for node in builder.nodes:
        if not node.args:
            continue
        fao: Fao
        ports: Sequence[int]
        if node.op == "split":
            fao, ports = _partial_split(node, builder)
        else:
            fao, ports = linear_fao(node), range(len(node.out_shapes or (node.shape,)))
        node_id = dag.add_node(fao)
        for port, arg in enumerate(node.args):
            src, src_port = builder.take(_source(arg))
            dag.connect(src, src_port, node_id, port)
        for fao_port, expr_port in enumerate(ports):
            builder.provide((node.id, expr_port), node_id, fao_port, fao.out_shapes[fao_port])

    parts: list[Shape] = []
    stacked: list[tuple[int, int]] = []
    for expr in exprs:
        src, src_port = builder.take(_source(expr))
        if expr.shape.is_matrix:
            vec = dag.add_node(Vec(*expr.shape.dims))
            dag.connect(src, src_port, vec, 0)
            src, src_port = vec, 0
        parts.append(Shape((expr.size,)))
        stacked.append((src, src_port))
    end = dag.add_node(VStack(parts))
    for port, (src, src_port) in enumerate(stacked):
        dag.connect(src, src_port, end, port)

    ensure_valid(dag)
    return dag


def _partial_split(node: Expr, builder: _Builder) -> tuple[Split, list[int]]:
    """A split keeping only the parts that are read; returns the kept expression ports."""
    offsets = [0]
    for shape in node.out_shapes[:-1]:
        offsets.append(offsets[-1] + shape.total)
    kept = [port for port in range(len(node.out_shapes)) if builder.uses[(node.id, port)]]
    fao = Split(
        [node.out_shapes[port] for port in kept],
        offsets=[offsets[port] for port in kept],
        total=node.size,
    )
    return fao, kept
