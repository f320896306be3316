"""Semantics-preserving dag rewrites.

``optimize`` repeatedly applies four local rewrites until nothing changes or the pass limit
is reached:

* common-successor factoring: ``sum(A u1, ..., A ur, ...)`` becomes ``sum(A sum(u1..ur), ...)``
  when the ``A`` nodes are equivalent atoms feeding nothing else;
* constant folding: two adjacent scalar/dense/sparse multiplications are replaced by their
  product when the product is no more expensive to apply than the pair;
* identity elision: identity-like nodes (identity, multiplication by one, single-input sums,
  single-output copies and trivial vstack/split) are spliced out. A dag reduced to one such
  node becomes a plain identity;
* zero-map pruning: single-port neighbours of a zero map are absorbed into it, a zero read by
  several consumers is duplicated per consumer, and a zero term fed by a copy is dropped from
  its sum together with that copy output.
"""

from __future__ import annotations

from collections.abc import Callable
from typing import Any

import numpy as np
import scipy.sparse as sp

from ..config.settings import get_config
from ..logging_config import get_logger
from .atoms import (
    Copy,
    DenseMatrix,
    Identity,
    ScalarMult,
    SparseMatrix,
    Split,
    Sum,
    VStack,
    ZeroMap,
)
from .base import Fao
from .dag import FaoDag, ensure_valid

logger = get_logger(__name__)

Rewrite = Callable[[FaoDag], int]


def _single_port(fao: Fao) -> bool:
    return len(fao.in_shapes) == 1 and len(fao.out_shapes) == 1


def _rewire_inputs(dag: FaoDag, node_id: int, fao: Fao, sources: list[tuple[int, int]]) -> None:
    """Replace a node's atom and reconnect its inputs from ``sources`` in port order."""
    for edge_id in dag.nodes[node_id].in_edges():
        dag.remove_edge(edge_id)
    dag.set_fao(node_id, fao)
    for port, (src, src_port) in enumerate(sources):
        dag.connect(src, src_port, node_id, port)


# ---- Common-successor factoring ----


def factor_common_successors(dag: FaoDag) -> int:
    """Factor one group of equivalent predecessors out of every sum node."""
    rewrites = 0
    for sum_id in sorted(dag.nodes):
        node = dag.nodes.get(sum_id)
        if node is None or not isinstance(node.fao, Sum) or None in node.e_in:
            continue
        candidates: list[tuple[int, int]] = []
        for port, edge_id in enumerate(node.e_in):
            pred_id = dag.edges[edge_id].src
            pred = dag.nodes[pred_id]
            if _single_port(pred.fao) and pred.e_in[0] is not None:
                candidates.append((port, pred_id))

        group: list[tuple[int, int]] = []
        for port, pred_id in candidates:
            fao = dag.nodes[pred_id].fao
            group = [
                (p, q) for p, q in candidates if dag.nodes[q].fao.same_as(fao)
            ]
            if len(group) > 1:
                break
        if len(group) < 2:
            continue
        _factor_group(dag, sum_id, group)
        rewrites += 1
    return rewrites


def _factor_group(dag: FaoDag, sum_id: int, group: list[tuple[int, int]]) -> None:
    keep_port, keep_id = group[0]
    grouped_ports = {port for port, _ in group}
    keeper = dag.nodes[keep_id].fao

    inner_sources = []
    for _, pred_id in group:
        in_edge = dag.edges[dag.nodes[pred_id].e_in[0]]
        inner_sources.append((in_edge.src, in_edge.src_port))
    sum_node = dag.nodes[sum_id]
    outer_sources = []
    for port, edge_id in enumerate(sum_node.e_in):
        if port == keep_port or port not in grouped_ports:
            edge = dag.edges[edge_id]
            outer_sources.append((edge.src, edge.src_port))

    for _, pred_id in group[1:]:
        dag.remove_node(pred_id)
    dag.remove_edge(dag.nodes[keep_id].e_in[0])
    inner = dag.add_node(Sum(len(inner_sources), keeper.in_shapes[0]))
    for port, (src, src_port) in enumerate(inner_sources):
        dag.connect(src, src_port, inner, port)
    dag.connect(inner, 0, keep_id, 0)
    shape = sum_node.fao.out_shapes[0]
    _rewire_inputs(dag, sum_id, Sum(len(outer_sources), shape), outer_sources)
    logger.debug("factored_common_successor", sum_node=sum_id, atom=keeper.kind, terms=len(group))


# ---- Constant folding ----

_CONSTANT_ATOMS = (ScalarMult, DenseMatrix, SparseMatrix)


def application_cost(fao: Fao) -> int:
    """Multiply-adds needed to apply a constant multiplication atom once."""
    if isinstance(fao, ScalarMult):
        return fao.in_shapes[0].total
    if isinstance(fao, SparseMatrix):
        return int(fao.data.nnz)
    return int(fao.data.size)


def _scaled(fao: Fao, alpha: float) -> Fao:
    if isinstance(fao, DenseMatrix):
        return DenseMatrix(alpha * fao.data)
    return SparseMatrix(
        alpha * fao.data, in_shape=fao.in_shapes[0], out_shape=fao.out_shapes[0]
    )


def compose_constants(first: Fao, second: Fao) -> Fao:
    """The atom applying ``first`` then ``second``; both must be constant multiplications."""
    if isinstance(first, ScalarMult) and isinstance(second, ScalarMult):
        return ScalarMult(first.alpha * second.alpha, first.in_shapes[0])
    if isinstance(first, ScalarMult):
        return _scaled(second, first.alpha)
    if isinstance(second, ScalarMult):
        return _scaled(first, second.alpha)

    product: Any = second.data @ first.data
    if product.shape == (1, 1) and first.in_shapes[0] == second.out_shapes[0]:
        value = product.toarray()[0, 0] if sp.issparse(product) else product[0, 0]
        return ScalarMult(float(value), first.in_shapes[0])
    if isinstance(first, DenseMatrix) and isinstance(second, DenseMatrix):
        return DenseMatrix(np.asarray(product))
    csr = sp.csr_matrix(product)
    csr.eliminate_zeros()
    return SparseMatrix(csr, in_shape=first.in_shapes[0], out_shape=second.out_shapes[0])


def fold_constants(dag: FaoDag) -> int:
    """Merge chains of constant multiplications whose product is no costlier to apply."""
    rewrites = 0
    for first_id in sorted(dag.nodes):
        node = dag.nodes.get(first_id)
        if node is None or not isinstance(node.fao, _CONSTANT_ATOMS):
            continue
        if node.e_out[0] is None:
            continue
        edge = dag.edges[node.e_out[0]]
        second = dag.nodes[edge.dst]
        if not isinstance(second.fao, _CONSTANT_ATOMS):
            continue
        composed = compose_constants(node.fao, second.fao)
        budget = application_cost(node.fao) + application_cost(second.fao)
        if application_cost(composed) > budget:
            continue
        downstream = None
        if second.e_out[0] is not None:
            out_edge = dag.edges[second.e_out[0]]
            downstream = (out_edge.dst, out_edge.dst_port)
        dag.remove_node(second.id)
        dag.set_fao(first_id, composed)
        if downstream is not None:
            dag.connect(first_id, 0, *downstream)
        logger.debug("folded_constants", node=first_id, kind=composed.kind)
        rewrites += 1
    return rewrites


# ---- Identity elision ----


def is_identity_like(fao: Fao) -> bool:
    """True when the atom is the identity map between equal shapes."""
    if isinstance(fao, Identity):
        return True
    if isinstance(fao, ScalarMult):
        return fao.alpha == 1.0
    if isinstance(fao, (Sum, Copy)):
        return fao.data == 1
    if isinstance(fao, (VStack, Split)):
        return (
            len(fao.in_shapes) == 1
            and len(fao.out_shapes) == 1
            and fao.contiguous
            and fao.in_shapes[0] == fao.out_shapes[0]
        )
    return False


def elide_identities(dag: FaoDag) -> int:
    """Splice identity-like nodes out of the dag where the dag stays well formed."""
    if len(dag.nodes) == 1:
        (node,) = dag.nodes.values()
        if is_identity_like(node.fao) and not isinstance(node.fao, Identity):
            dag.set_fao(node.id, Identity(node.fao.in_shapes[0]))
            return 1
        return 0
    rewrites = 0
    for node_id in sorted(dag.nodes):
        node = dag.nodes.get(node_id)
        if node is None or len(dag.nodes) == 1 or not is_identity_like(node.fao):
            continue
        in_edge, out_edge = node.e_in[0], node.e_out[0]
        if in_edge is not None and out_edge is not None:
            src = dag.edges[in_edge]
            dst = dag.edges[out_edge]
            dag.remove_node(node_id)
            dag.connect(src.src, src.src_port, dst.dst, dst.dst_port)
        elif out_edge is not None:
            # start node: its successor takes over as start if this was its only input
            successor = dag.nodes[dag.edges[out_edge].dst]
            if len(successor.in_edges()) != 1:
                continue
            dag.remove_node(node_id)
        elif in_edge is not None:
            predecessor = dag.nodes[dag.edges[in_edge].src]
            if len(predecessor.out_edges()) != 1:
                continue
            dag.remove_node(node_id)
        else:
            continue
        rewrites += 1
    return rewrites


# ---- Zero-map pruning ----


def _rewire_outputs(dag: FaoDag, node_id: int, fao: Fao, targets: list[tuple[int, int]]) -> None:
    """Replace a node's atom and reconnect its outputs to ``targets`` in port order."""
    for edge_id in dag.nodes[node_id].out_edges():
        dag.remove_edge(edge_id)
    dag.set_fao(node_id, fao)
    for port, (dst, dst_port) in enumerate(targets):
        dag.connect(node_id, port, dst, dst_port)


def _absorb_into_zero(dag: FaoDag, zero_id: int) -> bool:
    """Merge a single-port successor (A∘0 = 0) or predecessor (0∘A = 0) into the zero map."""
    zero = dag.nodes[zero_id]
    if zero.e_out[0] is not None:
        successor = dag.nodes[dag.edges[zero.e_out[0]].dst]
        if _single_port(successor.fao):
            downstream = None
            if successor.e_out[0] is not None:
                edge = dag.edges[successor.e_out[0]]
                downstream = (edge.dst, edge.dst_port)
            out_shape = successor.fao.out_shapes[0]
            dag.remove_node(successor.id)
            dag.set_fao(zero_id, ZeroMap(zero.fao.in_shapes[0], out_shape))
            if downstream is not None:
                dag.connect(zero_id, 0, *downstream)
            return True
    if zero.e_in[0] is not None:
        predecessor = dag.nodes[dag.edges[zero.e_in[0]].src]
        if _single_port(predecessor.fao):
            upstream = None
            if predecessor.e_in[0] is not None:
                edge = dag.edges[predecessor.e_in[0]]
                upstream = (edge.src, edge.src_port)
            in_shape = predecessor.fao.in_shapes[0]
            dag.remove_node(predecessor.id)
            dag.set_fao(zero_id, ZeroMap(in_shape, zero.fao.out_shapes[0]))
            if upstream is not None:
                dag.connect(*upstream, zero_id, 0)
            return True
    return False


def _drop_zero_term(dag: FaoDag, zero_id: int) -> bool:
    """Remove a copy -> zero -> sum branch; both the copy and the sum keep at least one port."""
    zero = dag.nodes[zero_id]
    if zero.e_in[0] is None or zero.e_out[0] is None:
        return False
    copy = dag.nodes[dag.edges[zero.e_in[0]].src]
    total = dag.nodes[dag.edges[zero.e_out[0]].dst]
    if not isinstance(copy.fao, Copy) or copy.fao.data < 2 or None in copy.e_out:
        return False
    if not isinstance(total.fao, Sum) or total.fao.data < 2:
        return False
    dag.remove_node(zero_id)
    sources = [(dag.edges[e].src, dag.edges[e].src_port) for e in total.in_edges()]
    _rewire_inputs(dag, total.id, Sum(len(sources), total.fao.out_shapes[0]), sources)
    targets = [(dag.edges[e].dst, dag.edges[e].dst_port) for e in copy.out_edges()]
    _rewire_outputs(dag, copy.id, Copy(len(targets), copy.fao.in_shapes[0]), targets)
    return True


def _fan_out_zero(dag: FaoDag, zero_id: int) -> bool:
    """Replace copy -> zero -> copy(k) by k zero maps read from the upstream copy."""
    zero = dag.nodes[zero_id]
    if zero.e_in[0] is None or zero.e_out[0] is None:
        return False
    source = dag.nodes[dag.edges[zero.e_in[0]].src]
    fanout = dag.nodes[dag.edges[zero.e_out[0]].dst]
    if not isinstance(source.fao, Copy) or not isinstance(fanout.fao, Copy):
        return False
    if None in fanout.e_out:
        return False
    targets = [(dag.edges[e].dst, dag.edges[e].dst_port) for e in fanout.out_edges()]
    in_shape, out_shape = zero.fao.in_shapes[0], zero.fao.out_shapes[0]
    dag.remove_node(zero_id)
    dag.remove_node(fanout.id)
    kept = [(dag.edges[e].dst, dag.edges[e].dst_port) for e in source.out_edges()]
    zeros = [dag.add_node(ZeroMap(in_shape, out_shape)) for _ in targets]
    readers = kept + [(z, 0) for z in zeros]
    _rewire_outputs(dag, source.id, Copy(len(readers), in_shape), readers)
    for z, (dst, dst_port) in zip(zeros, targets):
        dag.connect(z, 0, dst, dst_port)
    return True


def prune_zero_maps(dag: FaoDag) -> int:
    """Shrink zero-map branches: absorb neighbours into zero maps and drop zero summands."""
    rewrites = 0
    for node_id in sorted(dag.nodes):
        node = dag.nodes.get(node_id)
        if node is None or not isinstance(node.fao, ZeroMap):
            continue
        while _absorb_into_zero(dag, node_id):
            rewrites += 1
        if _drop_zero_term(dag, node_id) or _fan_out_zero(dag, node_id):
            logger.debug("pruned_zero_map", node=node_id)
            rewrites += 1
    return rewrites


REWRITES: tuple[tuple[str, Rewrite], ...] = (
    ("factor_common_successors", factor_common_successors),
    ("fold_constants", fold_constants),
    ("elide_identities", elide_identities),
    ("prune_zero_maps", prune_zero_maps),
)


def optimize(dag: FaoDag, max_passes: int | None = None) -> FaoDag:
    """Return an equivalent dag with the rewrites applied to a fixpoint.

    The input dag is left untouched; atoms are shared with the result.
    """
    ensure_valid(dag)
    if max_passes is None:
        max_passes = get_config().dag.max_rewrite_passes
    result = dag.copy()
    counts = {name: 0 for name, _ in REWRITES}
    passes = 0
    for passes in range(1, max_passes + 1):
        changed = 0
        for name, rewrite in REWRITES:
            applied = rewrite(result)
            counts[name] += applied
            changed += applied
        if not changed:
            break
    ensure_valid(result)
    logger.info(
        "dag_optimized",
        passes=passes,
        nodes_before=len(dag),
        nodes_after=len(result),
        **counts,
    )
    return result
