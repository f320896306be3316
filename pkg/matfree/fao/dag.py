"""FAO DAGs: structure, validation, the adjoint transformation and debug export.

Edges are internal only. The start node's inputs are the dag's external inputs and the end
node's outputs are its external outputs; the corresponding port slots hold ``None``.
"""

from __future__ import annotations

import itertools
from collections import deque
from collections.abc import Iterator
from dataclasses import dataclass, field

import networkx as nx

from .base import Fao
from .shapes import DimensionError, Shape


@dataclass(slots=True)
class FaoNode:
    id: int
    fao: Fao
    e_in: list[int | None]
    e_out: list[int | None]

    @property
    def data(self):
        return self.fao.data

    def in_edges(self) -> list[int]:
        return [e for e in self.e_in if e is not None]

    def out_edges(self) -> list[int]:
        return [e for e in self.e_out if e is not None]


@dataclass(frozen=True, slots=True)
class FaoEdge:
    id: int
    src: int
    src_port: int
    dst: int
    dst_port: int
    shape: Shape

    @property
    def length(self) -> int:
        return self.shape.total


@dataclass(frozen=True, slots=True)
class ValidationIssue:
    code: str
    message: str
    node: int | None = None
    edge: int | None = None


@dataclass
class ValidationReport:
    issues: list[ValidationIssue] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.issues

    def codes(self) -> set[str]:
        return {issue.code for issue in self.issues}

    def add(self, code: str, message: str, *, node: int | None = None, edge: int | None = None):
        self.issues.append(ValidationIssue(code, message, node, edge))

    def __str__(self) -> str:
        if self.ok:
            return "ok"
        return "; ".join(f"{issue.code}: {issue.message}" for issue in self.issues)


class DagValidationError(ValueError):
    """Raised when a dag fails validation; carries the full report."""

    def __init__(self, report: ValidationReport) -> None:
        super().__init__(str(report))
        self.report = report


class FaoDag:
    """A single-start, single-end DAG of FAO nodes."""

    def __init__(self) -> None:
        self.nodes: dict[int, FaoNode] = {}
        self.edges: dict[int, FaoEdge] = {}
        self._ids = itertools.count()
        self._edge_ids = itertools.count()

    # ---- Construction ----

    def add_node(self, fao: Fao) -> int:
        node_id = next(self._ids)
        self.nodes[node_id] = FaoNode(
            node_id, fao, [None] * len(fao.in_shapes), [None] * len(fao.out_shapes)
        )
        return node_id

    def connect(self, src: int, src_port: int, dst: int, dst_port: int) -> int:
        source, target = self.nodes[src], self.nodes[dst]
        if source.e_out[src_port] is not None:
            raise ValueError(f"output {src_port} of node {src} is already connected")
        if target.e_in[dst_port] is not None:
            raise ValueError(f"input {dst_port} of node {dst} is already connected")
        shape = source.fao.out_shapes[src_port]
        if shape != target.fao.in_shapes[dst_port]:
            raise DimensionError(
                f"edge {src}:{src_port} -> {dst}:{dst_port} carries {shape}, "
                f"expected {target.fao.in_shapes[dst_port]}"
            )
        edge_id = next(self._edge_ids)
        self.edges[edge_id] = FaoEdge(edge_id, src, src_port, dst, dst_port, shape)
        source.e_out[src_port] = edge_id
        target.e_in[dst_port] = edge_id
        return edge_id

    def chain(self, *faos: Fao) -> list[int]:
        """Add single-port atoms connected one after another; return their node ids."""
        ids = [self.add_node(fao) for fao in faos]
        for left, right in zip(ids, ids[1:]):
            self.connect(left, 0, right, 0)
        return ids

    def remove_edge(self, edge_id: int) -> FaoEdge:
        edge = self.edges.pop(edge_id)
        self.nodes[edge.src].e_out[edge.src_port] = None
        self.nodes[edge.dst].e_in[edge.dst_port] = None
        return edge

    def remove_node(self, node_id: int) -> None:
        node = self.nodes[node_id]
        for edge_id in node.in_edges() + node.out_edges():
            self.remove_edge(edge_id)
        del self.nodes[node_id]

    def set_fao(self, node_id: int, fao: Fao) -> None:
        """Replace a node's atom; the node must be disconnected where arities change."""
        node = self.nodes[node_id]
        if len(fao.in_shapes) != len(node.e_in) and node.in_edges():
            raise ValueError("disconnect inputs before changing the input arity")
        if len(fao.out_shapes) != len(node.e_out) and node.out_edges():
            raise ValueError("disconnect outputs before changing the output arity")
        if len(fao.in_shapes) != len(node.e_in):
            node.e_in = [None] * len(fao.in_shapes)
        if len(fao.out_shapes) != len(node.e_out):
            node.e_out = [None] * len(fao.out_shapes)
        node.fao = fao

    def copy(self) -> FaoDag:
        """Copy the structure; atoms (and their data) are shared, not duplicated."""
        clone = FaoDag()
        for node_id, node in self.nodes.items():
            clone.nodes[node_id] = FaoNode(node_id, node.fao, list(node.e_in), list(node.e_out))
        clone.edges = dict(self.edges)
        clone._ids = itertools.count(max(self.nodes, default=-1) + 1)
        clone._edge_ids = itertools.count(max(self.edges, default=-1) + 1)
        return clone

    # ---- Queries ----

    def sources(self) -> list[int]:
        return sorted(n for n, node in self.nodes.items() if not node.in_edges())

    def sinks(self) -> list[int]:
        return sorted(n for n, node in self.nodes.items() if not node.out_edges())

    @property
    def start(self) -> int:
        sources = self.sources()
        if len(sources) != 1:
            raise DagValidationError(_endpoint_report("start", sources))
        return sources[0]

    @property
    def end(self) -> int:
        sinks = self.sinks()
        if len(sinks) != 1:
            raise DagValidationError(_endpoint_report("end", sinks))
        return sinks[0]

    @property
    def input_shapes(self) -> tuple[Shape, ...]:
        return self.nodes[self.start].fao.in_shapes

    @property
    def output_shapes(self) -> tuple[Shape, ...]:
        return self.nodes[self.end].fao.out_shapes

    @property
    def input_size(self) -> int:
        return sum(s.total for s in self.input_shapes)

    @property
    def output_size(self) -> int:
        return sum(s.total for s in self.output_shapes)

    def to_networkx(self) -> nx.MultiDiGraph:
        graph = nx.MultiDiGraph()
        graph.add_nodes_from(sorted(self.nodes))
        for edge in self.edges.values():
            graph.add_edge(edge.src, edge.dst, key=edge.id)
        return graph

    def kinds(self) -> list[str]:
        return [self.nodes[n].fao.kind for n in sorted(self.nodes)]

    def count_kind(self, kind: str) -> int:
        return sum(1 for node in self.nodes.values() if node.fao.kind == kind)

    def fast_transform_count(self) -> int:
        return sum(1 for node in self.nodes.values() if node.fao.fast_transform)

    def __len__(self) -> int:
        return len(self.nodes)

    def __repr__(self) -> str:
        return f"<FaoDag nodes={len(self.nodes)} edges={len(self.edges)}>"


def _endpoint_report(which: str, candidates: list[int]) -> ValidationReport:
    report = ValidationReport()
    if candidates:
        report.add(f"multiple_{which}", f"{len(candidates)} {which} candidates: {candidates}")
    else:
        report.add(f"no_{which}", f"no node qualifies as the {which} node")
    return report


# ---- Validation ----


def validate(dag: FaoDag) -> ValidationReport:
    """Check acyclicity, a single start and end node, port wiring and edge shapes."""
    report = ValidationReport()
    if not dag.nodes:
        report.add("empty", "dag has no nodes")
        return report

    for edge in dag.edges.values():
        src, dst = dag.nodes.get(edge.src), dag.nodes.get(edge.dst)
        if src is None or dst is None:
            report.add("dangling_edge", f"edge {edge.id} references a missing node", edge=edge.id)
            continue
        if src.e_out[edge.src_port] != edge.id or dst.e_in[edge.dst_port] != edge.id:
            report.add("port_mismatch", f"edge {edge.id} is not registered on its ports",
                       edge=edge.id)
        produced = src.fao.out_shapes[edge.src_port]
        consumed = dst.fao.in_shapes[edge.dst_port]
        if not edge.shape == produced == consumed:
            report.add(
                "shape_mismatch",
                f"edge {edge.id} carries {edge.shape}; node {src.id} produces {produced}, "
                f"node {dst.id} expects {consumed}",
                edge=edge.id,
            )

    graph = dag.to_networkx()
    if not nx.is_directed_acyclic_graph(graph):
        cycle = nx.find_cycle(graph)
        report.add("cycle", f"cycle through nodes {[u for u, *_ in cycle]}")

    sources, sinks = dag.sources(), dag.sinks()
    if len(sources) != 1:
        report.issues.extend(_endpoint_report("start", sources).issues)
    if len(sinks) != 1:
        report.issues.extend(_endpoint_report("end", sinks).issues)

    for node_id, node in sorted(dag.nodes.items()):
        is_start = node_id in sources
        is_end = node_id in sinks
        if not is_start and None in node.e_in:
            report.add("dangling_port", f"node {node_id} has an unconnected input", node=node_id)
        if not is_end and None in node.e_out:
            report.add("dangling_port", f"node {node_id} has an unconnected output", node=node_id)
    return report


def ensure_valid(dag: FaoDag) -> None:
    report = validate(dag)
    if not report.ok:
        raise DagValidationError(report)


# ---- Evaluation order ----


def ready_order(dag: FaoDag) -> list[int]:
    """Node order of the FIFO ready-queue evaluation: start first, then each node as soon
    as all of its inputs are available."""
    return list(itertools.chain.from_iterable(ready_waves(dag)))


def ready_waves(dag: FaoDag) -> list[list[int]]:
    """The ready queue's contents at each generation; nodes of one wave are independent."""
    pending = {n: len(node.in_edges()) for n, node in dag.nodes.items()}
    queue: deque[int] = deque([dag.start])
    waves: list[list[int]] = []
    while queue:
        wave = list(queue)
        queue.clear()
        waves.append(wave)
        for node_id in wave:
            for edge_id in dag.nodes[node_id].out_edges():
                dst = dag.edges[edge_id].dst
                pending[dst] -= 1
                if pending[dst] == 0:
                    queue.append(dst)
    return waves


def iter_internal_edges(dag: FaoDag) -> Iterator[FaoEdge]:
    for edge_id in sorted(dag.edges):
        yield dag.edges[edge_id]


# ---- Adjoint ----


def adjoint(dag: FaoDag) -> FaoDag:
    """Reverse every edge and replace each node's oracle by its adjoint oracle."""
    ensure_valid(dag)
    result = FaoDag()
    for node_id, node in dag.nodes.items():
        result.nodes[node_id] = FaoNode(
            node_id, node.fao.adjoint_fao(), list(node.e_out), list(node.e_in)
        )
    for edge in dag.edges.values():
        result.edges[edge.id] = FaoEdge(
            edge.id, edge.dst, edge.dst_port, edge.src, edge.src_port, edge.shape
        )
    result._ids = itertools.count(max(dag.nodes) + 1)
    result._edge_ids = itertools.count(max(dag.edges, default=-1) + 1)
    return result


def structurally_equal(left: FaoDag, right: FaoDag) -> bool:
    """Same node ids, same wiring and equivalent atoms on every node."""
    if left.nodes.keys() != right.nodes.keys() or left.edges != right.edges:
        return False
    for node_id, node in left.nodes.items():
        other = right.nodes[node_id]
        if node.e_in != other.e_in or node.e_out != other.e_out:
            return False
        if not node.fao.same_as(other.fao):
            return False
    return True


# ---- Debug export ----


def to_dot(dag: FaoDag, name: str = "fao") -> str:
    """Render the dag as Graphviz DOT text (one line per node, one per edge)."""
    lines = [f"digraph {name} {{", "  rankdir=LR;"]
    sources, sinks = set(dag.sources()), set(dag.sinks())
    for node_id in sorted(dag.nodes):
        fao = dag.nodes[node_id].fao
        label = fao.kind
        if node_id in sources:
            label += " [start]"
        if node_id in sinks:
            label += " [end]"
        lines.append(f'  n{node_id} [label="{label}"];')
    for edge in iter_internal_edges(dag):
        lines.append(f'  n{edge.src} -> n{edge.dst} [label="e{edge.id} {edge.shape}"];')
    lines.append("}")
    return "\n".join(lines)
