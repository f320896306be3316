"""FAO dag structure, validation, evaluation and adjoints."""

from __future__ import annotations

import numpy as np
import pytest

from matfree.fao import (
    Copy,
    DagEvaluator,
    DagOperator,
    DagValidationError,
    DenseMatrix,
    DimensionError,
    FaoDag,
    PlanMismatchError,
    ScalarMult,
    Sum,
    adjoint,
    evaluate,
    materialize,
    plan_memory,
    ready_order,
    structurally_equal,
    to_dot,
    validate,
)
from matfree.fao.dag import ensure_valid, ready_waves


def fig1_dag(A, B) -> tuple[FaoDag, dict[str, int]]:
    """x -> copy -> (A x, B x) -> sum."""
    A, B = np.asarray(A, dtype=float), np.asarray(B, dtype=float)
    dag = FaoDag()
    ids = {
        "copy": dag.add_node(Copy(2, A.shape[1])),
        "A": dag.add_node(DenseMatrix(A)),
        "B": dag.add_node(DenseMatrix(B)),
        "sum": dag.add_node(Sum(2, A.shape[0])),
    }
    dag.connect(ids["copy"], 0, ids["A"], 0)
    dag.connect(ids["copy"], 1, ids["B"], 0)
    dag.connect(ids["A"], 0, ids["sum"], 0)
    dag.connect(ids["B"], 0, ids["sum"], 1)
    return dag, ids


def _dot_gap(dag, rng) -> tuple[float, float]:
    x = rng.standard_normal(dag.input_size)
    y = rng.standard_normal(dag.output_size)
    fx = evaluate(dag, [x])[0]
    aty = evaluate(adjoint(dag), [y])[0]
    scale = np.linalg.norm(fx) * np.linalg.norm(y) + np.linalg.norm(x) * np.linalg.norm(aty)
    return abs(fx @ y - x @ aty), scale


def test_fig1_evaluates_sum_of_products():
    dag, _ = fig1_dag(np.eye(2), np.eye(2))
    np.testing.assert_allclose(evaluate(dag, [[1.0, 2.0]])[0], [2.0, 4.0])


def test_fig1_matches_dense_formula(rng):
    A, B = rng.standard_normal((3, 4)), rng.standard_normal((3, 4))
    dag, _ = fig1_dag(A, B)
    x = rng.standard_normal(4)
    np.testing.assert_allclose(evaluate(dag, [x])[0], (A + B) @ x, rtol=1e-12)


def test_validate_accepts_well_formed_dag():
    dag, ids = fig1_dag(np.eye(2), np.eye(2))
    assert validate(dag).ok
    assert dag.start == ids["copy"]
    assert dag.end == ids["sum"]
    assert dag.input_size == 2 and dag.output_size == 2


def test_validate_reports_cycle():
    dag = FaoDag()
    total = dag.add_node(Sum(2, 3))
    scale = dag.add_node(ScalarMult(2.0, 3))
    copy = dag.add_node(Copy(2, 3))
    dag.connect(total, 0, scale, 0)
    dag.connect(scale, 0, copy, 0)
    dag.connect(copy, 1, total, 1)
    report = validate(dag)
    assert not report.ok
    assert "cycle" in report.codes()
    with pytest.raises(DagValidationError) as excinfo:
        ensure_valid(dag)
    assert "cycle" in excinfo.value.report.codes()


def test_validate_reports_multiple_endpoints():
    dag = FaoDag()
    dag.chain(ScalarMult(1.5, 2))
    dag.chain(ScalarMult(0.5, 2))
    codes = validate(dag).codes()
    assert {"multiple_start", "multiple_end"} <= codes
    with pytest.raises(DagValidationError):
        _ = dag.start


def test_validate_reports_empty_dag():
    assert validate(FaoDag()).codes() == {"empty"}


def test_connect_checks_shapes_and_ports():
    dag = FaoDag()
    left = dag.add_node(DenseMatrix(np.ones((3, 2))))
    right = dag.add_node(DenseMatrix(np.ones((2, 2))))
    with pytest.raises(DimensionError):
        dag.connect(left, 0, right, 0)
    other = dag.add_node(ScalarMult(2.0, 3))
    dag.connect(left, 0, other, 0)
    spare = dag.add_node(ScalarMult(1.0, 3))
    with pytest.raises(ValueError):
        dag.connect(left, 0, spare, 0)


def test_ready_order_is_fifo():
    dag, ids = fig1_dag(np.eye(2), np.eye(2))
    assert ready_order(dag) == [ids["copy"], ids["A"], ids["B"], ids["sum"]]
    assert ready_waves(dag) == [[ids["copy"]], [ids["A"], ids["B"]], [ids["sum"]]]


def test_adjoint_reverses_edges_and_transposes(rng):
    A, B = rng.standard_normal((3, 4)), rng.standard_normal((3, 4))
    dag, ids = fig1_dag(A, B)
    transposed = adjoint(dag)
    assert transposed.start == ids["sum"]
    assert transposed.end == ids["copy"]
    assert transposed.nodes[ids["sum"]].fao.kind == "copy"
    y = rng.standard_normal(3)
    np.testing.assert_allclose(evaluate(transposed, [y])[0], (A + B).T @ y, rtol=1e-12)


def test_adjoint_is_an_involution(rng, random_dag):
    for _ in range(20):
        dag = random_dag(rng, 6)
        assert structurally_equal(adjoint(adjoint(dag)), dag)


def test_random_dags_pass_dot_test(rng, random_dag):
    for _ in range(100):
        dag = random_dag(rng, 6)
        gap, scale = _dot_gap(dag, rng)
        assert gap <= 1e-10 * scale


def test_materialize_matches_evaluate(rng, random_dag, metrics):
    for _ in range(10):
        dag = random_dag(rng, 5)
        matrix = materialize(dag)
        x = rng.standard_normal(dag.input_size)
        np.testing.assert_allclose(matrix @ x, evaluate(dag, [x])[0], rtol=1e-10, atol=1e-10)
    assert metrics.materializations == 10


def test_parallel_evaluation_matches_serial(rng, random_dag):
    for _ in range(20):
        dag = random_dag(rng, 6)
        x = rng.standard_normal(dag.input_size)
        serial = evaluate(dag, [x])[0]
        parallel = evaluate(dag, [x], parallel_workers=3)[0]
        np.testing.assert_allclose(parallel, serial, rtol=1e-14, atol=1e-14)


def test_evaluator_is_reusable_and_copies_outputs(rng):
    dag, _ = fig1_dag(rng.standard_normal((3, 3)), rng.standard_normal((3, 3)))
    evaluator = DagEvaluator(dag)
    x1, x2 = rng.standard_normal(3), rng.standard_normal(3)
    first = evaluator([x1])[0]
    second = evaluator([x2])[0]
    np.testing.assert_allclose(evaluator([x1])[0], first)
    assert not np.allclose(first, second)
    with pytest.raises(DimensionError):
        evaluator([x1, x2])


def test_evaluator_rejects_foreign_plan(rng):
    dag, _ = fig1_dag(np.eye(2), np.eye(2))
    other = FaoDag()
    other.chain(DenseMatrix(np.ones((2, 2))), ScalarMult(2.0, 2))
    with pytest.raises(PlanMismatchError):
        DagEvaluator(dag, plan_memory(other))
    with pytest.raises(PlanMismatchError):
        DagEvaluator(dag, plan_memory(dag), parallel_workers=2)


def test_dag_operator_counts_applications(rng, metrics):
    A, B = rng.standard_normal((3, 4)), rng.standard_normal((3, 4))
    dag, _ = fig1_dag(A, B)
    operator = DagOperator(dag)
    try:
        assert operator.shape == (3, 4)
        x, y = rng.standard_normal(4), rng.standard_normal(3)
        np.testing.assert_allclose(operator.matvec(x), (A + B) @ x, rtol=1e-12)
        np.testing.assert_allclose(operator.rmatvec(y), (A + B).T @ y, rtol=1e-12)
    finally:
        operator.close()
    assert metrics.forward_evals == 1
    assert metrics.adjoint_evals == 1
    assert metrics.materializations == 0


def test_copy_shares_atoms_but_not_structure():
    dag, ids = fig1_dag(np.eye(2), np.eye(2))
    clone = dag.copy()
    assert structurally_equal(clone, dag)
    clone.remove_node(ids["B"])
    assert ids["B"] in dag.nodes
    assert clone.nodes[ids["A"]].fao is dag.nodes[ids["A"]].fao


def test_to_dot_lists_nodes_and_edges():
    dag, _ = fig1_dag(np.eye(2), np.eye(2))
    text = to_dot(dag)
    assert text.startswith("digraph fao {")
    assert text.count("->") == 4
    assert "copy [start]" in text
    assert "sum [end]" in text
