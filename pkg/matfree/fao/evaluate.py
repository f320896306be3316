"""Evaluating FAO DAGs against a preallocated global array."""

from __future__ import annotations

from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from typing import Any

import numpy as np
from scipy.sparse.linalg import LinearOperator

from ..metrics import get_metrics
from .base import workspace
from .dag import FaoDag, adjoint, ensure_valid, ready_order, ready_waves
from .memory import MemoryPlan, plan_memory
from .shapes import DimensionError, as_flat, as_shaped


class PlanMismatchError(ValueError):
    """Raised when a memory plan was not built for the dag being evaluated."""


class DagEvaluator:
    """Evaluates a dag repeatedly without allocating edge arrays.

    Edge arrays are views into one global buffer laid out by ``plan``; scratch workspaces and
    output arrays are allocated once. Nodes run in the FIFO ready-queue order. With
    ``parallel_workers > 0`` each ready-queue generation runs on a thread pool, which needs a
    plan built with ``parallel=True``.
    """

    def __init__(
        self,
        dag: FaoDag,
        plan: MemoryPlan | None = None,
        *,
        parallel_workers: int = 0,
    ) -> None:
        ensure_valid(dag)
        if plan is None:
            plan = plan_memory(dag, parallel=parallel_workers > 0)
        self._check_plan(dag, plan, parallel_workers)
        self.dag = dag
        self.plan = plan
        self.parallel_workers = parallel_workers
        self.start = dag.start
        self.end = dag.end
        self.order = ready_order(dag)
        self.waves = ready_waves(dag)
        self._skip = plan.aliased_nodes

        self.buffer = np.zeros(plan.global_size, dtype=np.float64)
        views = {
            edge_id: self.buffer[lo:hi]
            for edge_id, (lo, hi) in ((e, plan.interval(e)) for e in plan.lengths)
        }
        end_node = dag.nodes[self.end]
        self.outputs = [np.zeros(s.total, dtype=np.float64) for s in end_node.fao.out_shapes]
        self._args: dict[int, tuple[list[Any], list[np.ndarray]]] = {}
        for node_id, node in dag.nodes.items():
            ins = [views[e] if e is not None else None for e in node.e_in]
            if node_id == self.end:
                outs = list(self.outputs)
            else:
                outs = [views[e] for e in node.out_edges()]
            self._args[node_id] = (ins, outs)

        scratch_size = max(node.fao.scratch_size for node in dag.nodes.values())
        slots = max(len(wave) for wave in self.waves) if parallel_workers > 0 else 1
        self._scratch = [np.empty(scratch_size, dtype=np.float64) for _ in range(slots)]
        self._pool = ThreadPoolExecutor(parallel_workers) if parallel_workers > 0 else None

    @staticmethod
    def _check_plan(dag: FaoDag, plan: MemoryPlan, parallel_workers: int) -> None:
        expected = {edge_id: edge.length for edge_id, edge in dag.edges.items()}
        if plan.lengths != expected or set(plan.assignments) != set(expected):
            raise PlanMismatchError("memory plan does not cover this dag's edges")
        if any(hi > plan.global_size for hi in (plan.interval(e)[1] for e in expected)):
            raise PlanMismatchError("memory plan assigns an edge outside the global array")
        if parallel_workers > 0 and not plan.parallel:
            raise PlanMismatchError("parallel evaluation needs a plan built with parallel=True")

    def _run_node(self, node_id: int, inputs: Sequence[np.ndarray], slot: int) -> None:
        fao = self.dag.nodes[node_id].fao
        ins, outs = self._args[node_id]
        if node_id == self.start:
            ins = list(inputs)
        fao.forward(ins, outs, workspace(fao, self._scratch[slot]))

    def run(self, inputs: Sequence[np.ndarray]) -> list[np.ndarray]:
        """Evaluate on flat, conforming float64 inputs; returns the internal output arrays."""
        if self._pool is None:
            for node_id in self.order:
                if node_id not in self._skip:
                    self._run_node(node_id, inputs, 0)
            return self.outputs
        for wave in self.waves:
            jobs = [node_id for node_id in wave if node_id not in self._skip]
            futures = [
                self._pool.submit(self._run_node, node_id, inputs, slot)
                for slot, node_id in enumerate(jobs)
            ]
            for future in futures:
                future.result()
        return self.outputs

    def __call__(self, inputs: Sequence[Any]) -> list[np.ndarray]:
        """Evaluate on arbitrary conforming arrays; returns shaped copies."""
        shapes = self.dag.input_shapes
        if len(inputs) != len(shapes):
            raise DimensionError(f"dag takes {len(shapes)} inputs, got {len(inputs)}")
        flat = [
            as_flat(x, s, label=f"dag input {k}") for k, (x, s) in enumerate(zip(inputs, shapes))
        ]
        outputs = self.run(flat)
        return [as_shaped(y.copy(), s) for y, s in zip(outputs, self.dag.output_shapes)]

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None


def evaluate(
    dag: FaoDag,
    inputs: Sequence[Any],
    plan: MemoryPlan | None = None,
    *,
    parallel_workers: int = 0,
) -> list[np.ndarray]:
    """Apply the linear map represented by ``dag`` to ``inputs``."""
    evaluator = DagEvaluator(dag, plan, parallel_workers=parallel_workers)
    try:
        return evaluator(inputs)
    finally:
        evaluator.close()


def _split_vector(x: np.ndarray, sizes: Sequence[int]) -> list[np.ndarray]:
    bounds = np.cumsum([0, *sizes])
    return [x[lo:hi] for lo, hi in zip(bounds[:-1], bounds[1:])]


class DagOperator(LinearOperator):
    """A dag and its adjoint exposed as a scipy ``LinearOperator`` on stacked vectors."""

    def __init__(self, dag: FaoDag, *, parallel_workers: int = 0) -> None:
        self.dag = dag
        self._forward = DagEvaluator(dag, parallel_workers=parallel_workers)
        self._adjoint = DagEvaluator(adjoint(dag), parallel_workers=parallel_workers)
        self._in_sizes = [s.total for s in dag.input_shapes]
        self._out_sizes = [s.total for s in dag.output_shapes]
        super().__init__(dtype=np.float64, shape=(sum(self._out_sizes), sum(self._in_sizes)))

    def _matvec(self, x: np.ndarray) -> np.ndarray:
        get_metrics().record_forward()
        x = np.ascontiguousarray(x, dtype=np.float64).reshape(-1)
        outputs = self._forward.run(_split_vector(x, self._in_sizes))
        return np.concatenate(outputs)

    def _rmatvec(self, y: np.ndarray) -> np.ndarray:
        get_metrics().record_adjoint()
        y = np.ascontiguousarray(y, dtype=np.float64).reshape(-1)
        outputs = self._adjoint.run(_split_vector(y, self._out_sizes))
        return np.concatenate(outputs)

    def close(self) -> None:
        self._forward.close()
        self._adjoint.close()


def materialize(dag: FaoDag) -> np.ndarray:
    """Dense matrix of the dag's map on stacked inputs, built from unit vectors."""
    get_metrics().record_materialization("materialize")
    evaluator = DagEvaluator(dag)
    sizes = [s.total for s in dag.input_shapes]
    n = sum(sizes)
    columns = []
    unit = np.zeros(n)
    for k in range(n):
        unit[k] = 1.0
        columns.append(np.concatenate(evaluator.run(_split_vector(unit, sizes))))
        unit[k] = 0.0
    return np.column_stack(columns) if columns else np.zeros((dag.output_size, 0))
