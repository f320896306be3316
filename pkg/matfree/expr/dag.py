"""The explicit node/edge view of an expression.

``build_dag`` flattens an :class:`Expr` into numbered nodes and port-addressed edges
annotated with curvature and sign; ``to_expr`` turns the view back into expressions.
Part nodes are not materialized: a consumer of a split part is wired to the corresponding
output port of the split node.
"""

from __future__ import annotations

from collections.abc import Iterator
from dataclasses import dataclass, field
from typing import Any

from ..fao.shapes import Shape
from .dcp import Curvature, Sign, analyze
from .expression import (
    LINEAR_OPS,
    Expr,
    ExpressionShapeError,
    apply_atom,
    constant,
    part,
    topological,
    variable,
)


@dataclass
class ExprNode:
    id: int
    func: str
    data: Any
    shape: Shape
    e_in: list[int] = field(default_factory=list)
    e_out: list[int] = field(default_factory=list)
    curvature: Curvature = Curvature.UNKNOWN
    sign: Sign = Sign.UNKNOWN
    out_shapes: tuple[Shape, ...] = ()

    @property
    def is_start(self) -> bool:
        return not self.e_in

    @property
    def is_linear(self) -> bool:
        return self.func in LINEAR_OPS


@dataclass(frozen=True)
class ExprEdge:
    id: int
    src: int
    src_port: int
    dst: int
    dst_port: int


@dataclass
class ExpressionDag:
    nodes: dict[int, ExprNode]
    edges: dict[int, ExprEdge]
    end: int
    variables: dict[str, Shape]
    end_port: int = 0

    def start_nodes(self) -> list[ExprNode]:
        return [node for node in self.nodes.values() if node.is_start]

    def funcs(self) -> list[str]:
        return [self.nodes[n].func for n in sorted(self.nodes)]

    def count(self, func: str) -> int:
        return sum(1 for node in self.nodes.values() if node.func == func)

    def successors(self, node_id: int) -> list[int]:
        return [self.edges[e].dst for e in self.nodes[node_id].e_out]

    def predecessors(self, node_id: int) -> list[int]:
        return [self.edges[e].src for e in self.nodes[node_id].e_in]

    @property
    def is_linear(self) -> bool:
        """Every non-start node is linear and every start node is a variable."""
        return all(
            node.func == "variable" if node.is_start else node.is_linear
            for node in self.nodes.values()
        )

    @property
    def is_constant(self) -> bool:
        return all(node.func != "variable" for node in self.nodes.values())

    @property
    def curvature(self) -> Curvature:
        return self.nodes[self.end].curvature

    def __iter__(self) -> Iterator[ExprNode]:
        return (self.nodes[n] for n in sorted(self.nodes))

    def __len__(self) -> int:
        return len(self.nodes)


def build_dag(expr: Expr) -> ExpressionDag:
    """Number the nodes of ``expr`` (arguments first) and wire them with port edges."""
    notes = analyze(expr)
    order = [node for node in topological(expr) if node.op != "part"]
    ids = {node.id: index for index, node in enumerate(order)}
    nodes: dict[int, ExprNode] = {}
    edges: dict[int, ExprEdge] = {}
    variables: dict[str, Shape] = {}

    def source(arg: Expr) -> tuple[int, int]:
        if arg.op == "part":
            return ids[arg.args[0].id], arg.data
        return ids[arg.id], 0

    for node in order:
        node_id = ids[node.id]
        note = notes[node.id]
        nodes[node_id] = ExprNode(
            node_id,
            node.op,
            node.data,
            node.shape,
            curvature=note.curvature,
            sign=note.sign,
            out_shapes=node.out_shapes or (node.shape,),
        )
        if node.is_variable:
            known = variables.setdefault(node.name, node.shape)
            if known != node.shape:
                raise ExpressionShapeError(f"variable {node.name!r} has conflicting shapes")
        for port, arg in enumerate(node.args):
            src, src_port = source(arg)
            edge = ExprEdge(len(edges), src, src_port, node_id, port)
            edges[edge.id] = edge
            nodes[src].e_out.append(edge.id)
            nodes[node_id].e_in.append(edge.id)

    if expr.op == "part":
        return ExpressionDag(nodes, edges, ids[expr.args[0].id], variables, expr.data)
    return ExpressionDag(nodes, edges, ids[expr.id], variables)


def to_expr(dag: ExpressionDag) -> Expr:
    """Rebuild the expression represented by ``dag``."""
    built: dict[int, Expr] = {}

    def output(edge: ExprEdge) -> Expr:
        node = built[edge.src]
        return part(node, edge.src_port) if node.op == "split" else node

    for node_id in sorted(dag.nodes):
        node = dag.nodes[node_id]
        if node.func == "variable":
            built[node_id] = variable(node.data, node.shape)
        elif node.func == "constant":
            built[node_id] = constant(node.data)
        else:
            args = [output(dag.edges[e]) for e in node.e_in]
            built[node_id] = apply_atom(node.func, args, node.data)
    root = built[dag.end]
    return part(root, dag.end_port) if root.op == "split" else root
