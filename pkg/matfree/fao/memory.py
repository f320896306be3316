"""Mapping edge arrays onto one global array.

Two edges conflict when they can be in use at the same time. Edge e = (u1, v1) is in use from
the evaluation of u1 until the evaluation of v1, so e and f can share memory exactly when a
directed path runs from v1 to the source of f (or from the destination of f to u1). Edges that
meet at a node additionally conflict unless that node's atom may write its output over its
input. Conflict-free edges share storage through a greedy coloring of the conflict graph.

Copy, split and vstack nodes can also alias their edges outright: copies share their input
array, split outputs are segments of the input, and vstack inputs are segments of the output.
Such groups are colored as a single vertex and the evaluator skips the aliased node.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

import networkx as nx

from ..logging_config import get_logger
from .atoms import Copy, Split, VStack
from .dag import FaoDag, ensure_valid, iter_internal_edges, ready_order

logger = get_logger(__name__)

EdgePair = tuple[int, int]


@dataclass(frozen=True)
class AliasGroup:
    """Edges stored in one block; ``offsets`` are relative to the block start."""

    node: int
    offsets: dict[int, int]
    length: int

    @property
    def edges(self) -> list[int]:
        return sorted(self.offsets)


@dataclass(frozen=True)
class MemoryPlan:
    """Offsets (in float64 entries) of every internal edge array in the global array."""

    assignments: dict[int, int]
    lengths: dict[int, int]
    global_size: int
    conflict_pairs: frozenset[EdgePair]
    groups: tuple[AliasGroup, ...] = ()
    parallel: bool = False
    colors: dict[int, int] = field(default_factory=dict)

    @property
    def global_bytes(self) -> int:
        return self.global_size * 8

    @property
    def naive_size(self) -> int:
        return sum(self.lengths.values())

    @property
    def aliased_nodes(self) -> frozenset[int]:
        return frozenset(group.node for group in self.groups)

    def interval(self, edge_id: int) -> tuple[int, int]:
        start = self.assignments[edge_id]
        return start, start + self.lengths[edge_id]

    def group_of(self, edge_id: int) -> AliasGroup | None:
        for group in self.groups:
            if edge_id in group.offsets:
                return group
        return None


def _reachability(dag: FaoDag) -> dict[int, set[int]]:
    graph = dag.to_networkx()
    return {node: nx.descendants(graph, node) | {node} for node in graph.nodes}


def conflict_pairs(dag: FaoDag, *, allow_in_place: bool = True) -> frozenset[EdgePair]:
    """Pairs (e, f), e < f, of internal edges that may be in use simultaneously."""
    reach = _reachability(dag)
    edges = list(iter_internal_edges(dag))
    pairs: set[EdgePair] = set()
    for index, e in enumerate(edges):
        for f in edges[index + 1 :]:
            ordered = f.src in reach[e.dst] or e.src in reach[f.dst]
            if ordered:
                through = e.dst if e.dst == f.src else f.dst if f.dst == e.src else None
                if through is None:
                    continue
                if allow_in_place and dag.nodes[through].fao.in_place:
                    continue
            pairs.add((e.id, f.id))
    return frozenset(pairs)


def alias_groups(dag: FaoDag) -> list[AliasGroup]:
    """Aliasing opportunities for copy, split and vstack nodes with only internal edges.

    Nodes are visited in evaluation order; a node whose edges already belong to a group is
    skipped so that no edge joins two groups.
    """
    grouped: set[int] = set()
    groups: list[AliasGroup] = []
    for node_id in ready_order(dag):
        node = dag.nodes[node_id]
        fao = node.fao
        if None in node.e_in or None in node.e_out:
            continue
        if isinstance(fao, Copy) and fao.data > 1:
            offsets = {edge: 0 for edge in node.e_in + node.e_out}
            length = fao.in_shapes[0].total
        elif isinstance(fao, Split) and len(fao.out_shapes) > 1:
            offsets = {node.e_in[0]: 0}
            offsets.update(zip(node.e_out, fao.offsets))
            length = fao.total
        elif isinstance(fao, VStack) and len(fao.in_shapes) > 1 and fao.contiguous:
            offsets = {node.e_out[0]: 0}
            offsets.update(zip(node.e_in, fao.offsets))
            length = fao.total
        else:
            continue
        if grouped.intersection(offsets):
            continue
        grouped.update(offsets)
        groups.append(AliasGroup(node_id, offsets, length))
    return groups


def _color(
    dag: FaoDag,
    pairs: frozenset[EdgePair],
    groups: list[AliasGroup],
    *,
    parallel: bool,
) -> MemoryPlan:
    lengths = {edge.id: edge.length for edge in iter_internal_edges(dag)}
    vertex_of: dict[int, int] = {}
    members: dict[int, dict[int, int]] = {}
    for group in groups:
        vertex = min(group.offsets)
        members[vertex] = dict(group.offsets)
        for edge_id in group.offsets:
            vertex_of[edge_id] = vertex
    for edge_id in lengths:
        if edge_id not in vertex_of:
            vertex_of[edge_id] = edge_id
            members[edge_id] = {edge_id: 0}
    width = {
        vertex: max(offset + lengths[e] for e, offset in offs.items())
        for vertex, offs in members.items()
    }

    graph = nx.Graph()
    graph.add_nodes_from(sorted(members))
    for e, f in pairs:
        u, v = vertex_of[e], vertex_of[f]
        if u != v:
            graph.add_edge(u, v)

    coloring = nx.greedy_color(graph, strategy="largest_first")
    color_width: dict[int, int] = defaultdict(int)
    for vertex, color in coloring.items():
        color_width[color] = max(color_width[color], width[vertex])
    color_offset: dict[int, int] = {}
    position = 0
    for color in sorted(color_width):
        color_offset[color] = position
        position += color_width[color]

    assignments: dict[int, int] = {}
    colors: dict[int, int] = {}
    for vertex, offs in members.items():
        base = color_offset[coloring[vertex]]
        for edge_id, offset in offs.items():
            assignments[edge_id] = base + offset
            colors[edge_id] = coloring[vertex]
    return MemoryPlan(
        assignments=assignments,
        lengths=lengths,
        global_size=position,
        conflict_pairs=pairs,
        groups=tuple(groups),
        parallel=parallel,
        colors=colors,
    )


def plan_memory(
    dag: FaoDag,
    *,
    allow_in_place: bool = True,
    parallel: bool = False,
    alias: bool = True,
) -> MemoryPlan:
    """Assign every internal edge an offset so that conflicting edges never overlap.

    Plans with and without aliasing groups are both colored and the smaller one is kept
    (ties keep the aliased plan). ``parallel=True`` treats every pair of edges meeting at a
    node as conflicting, which keeps wave-parallel evaluation safe.
    """
    ensure_valid(dag)
    pairs = conflict_pairs(dag, allow_in_place=allow_in_place and not parallel)
    candidates = []
    groups = alias_groups(dag) if alias else []
    if groups:
        candidates.append(_color(dag, pairs, groups, parallel=parallel))
    candidates.append(_color(dag, pairs, [], parallel=parallel))
    plan = min(candidates, key=lambda candidate: candidate.global_size)
    logger.debug(
        "memory_planned",
        edges=len(plan.lengths),
        global_size=plan.global_size,
        naive_size=plan.naive_size,
        aliased_nodes=len(plan.groups),
    )
    return plan


def verify_plan(dag: FaoDag, plan: MemoryPlan) -> list[str]:
    """Replay the FIFO evaluation order and report every read of a clobbered edge array.

    Returns an empty list when the plan is sound for this dag.
    """
    violations: list[str] = []
    owner: list[object] = [None] * plan.global_size
    token: dict[int, object] = {}
    for group in plan.groups:
        for edge_id in group.offsets:
            token[edge_id] = ("group", group.node)
    for edge_id in plan.lengths:
        token.setdefault(edge_id, ("edge", edge_id))
    aliased = plan.aliased_nodes

    for node_id in ready_order(dag):
        node = dag.nodes[node_id]
        for edge_id in node.in_edges():
            lo, hi = plan.interval(edge_id)
            clobbered = [k for k in range(lo, hi) if owner[k] != token[edge_id]]
            if clobbered:
                violations.append(
                    f"node {node_id} reads edge {edge_id} but entries {clobbered[:3]} "
                    "were overwritten"
                )
        if node_id in aliased:
            continue
        for edge_id in node.out_edges():
            lo, hi = plan.interval(edge_id)
            owner[lo:hi] = [token[edge_id]] * (hi - lo)
    for e, f in plan.conflict_pairs:
        if plan.group_of(e) is not None and plan.group_of(e) is plan.group_of(f):
            continue
        (a, b), (c, d) = plan.interval(e), plan.interval(f)
        if a < d and c < b:
            violations.append(f"conflicting edges {e} and {f} overlap")
    return violations
