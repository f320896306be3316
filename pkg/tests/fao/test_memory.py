"""Memory planning: conflict pairs, coloring and plan soundness."""

from __future__ import annotations

import numpy as np

from matfree.canon import canonicalize
from matfree.fao import (
    Copy,
    DagEvaluator,
    DenseMatrix,
    FaoDag,
    MemoryPlan,
    ScalarMult,
    Sum,
    conflict_pairs,
    evaluate,
    make_split,
    make_vstack,
    plan_memory,
    verify_plan,
)


def _fig1(atom) -> tuple[FaoDag, list[int]]:
    dag = FaoDag()
    copy = dag.add_node(Copy(2, 4))
    left, right = dag.add_node(atom()), dag.add_node(atom())
    total = dag.add_node(Sum(2, 4))
    edges = [
        dag.connect(copy, 0, left, 0),
        dag.connect(copy, 1, right, 0),
        dag.connect(left, 0, total, 0),
        dag.connect(right, 0, total, 1),
    ]
    return dag, edges


def _pair(e: int, f: int) -> tuple[int, int]:
    return (min(e, f), max(e, f))


def test_sibling_edges_conflict():
    dag, (to_a, to_b, _, _) = _fig1(lambda: DenseMatrix(np.eye(4)))
    assert _pair(to_a, to_b) in conflict_pairs(dag)


def test_chain_ends_do_not_conflict():
    dag = FaoDag()
    ids = dag.chain(*(DenseMatrix(np.eye(3)) for _ in range(4)))
    first, _, last = (dag.nodes[n].e_out[0] for n in ids[:3])
    pairs = conflict_pairs(dag)
    assert _pair(first, last) not in pairs
    assert (first, dag.nodes[ids[1]].e_out[0]) in pairs


def test_in_place_node_lets_edges_share():
    dag = FaoDag()
    ids = dag.chain(DenseMatrix(np.eye(3)), ScalarMult(2.0, 3), DenseMatrix(np.eye(3)))
    e_in, e_out = dag.nodes[ids[0]].e_out[0], dag.nodes[ids[1]].e_out[0]
    assert not conflict_pairs(dag)
    assert conflict_pairs(dag, allow_in_place=False) == {(e_in, e_out)}


def test_single_edge_plan():
    dag = FaoDag()
    dag.chain(DenseMatrix(np.ones((5, 2))), DenseMatrix(np.ones((3, 5))))
    assert conflict_pairs(dag) == frozenset()
    plan = plan_memory(dag)
    assert plan.global_size == 5
    assert plan.naive_size == 5


def test_fig1_with_in_place_atoms_uses_at_most_sixty_percent():
    dag, _ = _fig1(lambda: ScalarMult(3.0, 4))
    plan = plan_memory(dag)
    assert plan.naive_size == 16
    assert plan.global_size <= 0.6 * plan.naive_size
    assert verify_plan(dag, plan) == []
    np.testing.assert_allclose(evaluate(dag, [np.arange(4.0)], plan)[0], 6 * np.arange(4.0))


def test_copy_alias_group_shares_the_input_array():
    dag = FaoDag()
    head = dag.add_node(DenseMatrix(np.ones((4, 2))))
    copy = dag.add_node(Copy(2, 4))
    left, right = dag.add_node(DenseMatrix(np.eye(4))), dag.add_node(DenseMatrix(np.eye(4)))
    total = dag.add_node(Sum(2, 4))
    into = dag.connect(head, 0, copy, 0)
    outs = [dag.connect(copy, 0, left, 0), dag.connect(copy, 1, right, 0)]
    dag.connect(left, 0, total, 0)
    dag.connect(right, 0, total, 1)

    plan = plan_memory(dag)
    assert verify_plan(dag, plan) == []
    assert copy in plan.aliased_nodes
    assert {plan.assignments[e] for e in [into, *outs]} == {plan.assignments[into]}
    unaliased = plan_memory(dag, alias=False)
    assert plan.global_size <= unaliased.global_size
    x = np.array([1.0, 2.0])
    np.testing.assert_allclose(evaluate(dag, [x], plan)[0], np.full(4, 6.0))


def test_split_and_vstack_alias_segments(rng):
    dag = FaoDag()
    head = dag.add_node(DenseMatrix(rng.standard_normal((5, 3))))
    split = dag.add_node(make_split([2, 3]))
    upper = dag.add_node(DenseMatrix(rng.standard_normal((2, 2))))
    lower = dag.add_node(DenseMatrix(rng.standard_normal((3, 3))))
    stack = dag.add_node(make_vstack([2, 3]))
    tail = dag.add_node(DenseMatrix(rng.standard_normal((4, 5))))
    dag.connect(head, 0, split, 0)
    dag.connect(split, 0, upper, 0)
    dag.connect(split, 1, lower, 0)
    dag.connect(upper, 0, stack, 0)
    dag.connect(lower, 0, stack, 1)
    dag.connect(stack, 0, tail, 0)

    x = rng.standard_normal(3)
    expected = evaluate(dag, [x], plan_memory(dag, alias=False))[0]
    plan = plan_memory(dag)
    assert verify_plan(dag, plan) == []
    np.testing.assert_allclose(evaluate(dag, [x], plan)[0], expected, rtol=1e-12)


def test_random_plans_are_sound(rng, random_dag):
    for _ in range(50):
        dag = random_dag(rng, 6)
        x = rng.standard_normal(dag.input_size)
        reference = None
        for options in (
            {},
            {"allow_in_place": False},
            {"alias": False},
            {"parallel": True},
        ):
            plan = plan_memory(dag, **options)
            assert verify_plan(dag, plan) == []
            assert plan.global_size <= plan.naive_size
            out = DagEvaluator(dag, plan)([x])[0]
            if reference is None:
                reference = out
            np.testing.assert_allclose(out, reference, rtol=1e-12, atol=1e-12)


def test_verify_plan_catches_overlapping_conflicts():
    dag, edges = _fig1(lambda: DenseMatrix(np.eye(4)))
    plan = plan_memory(dag)
    broken = MemoryPlan(
        assignments={e: 0 for e in edges},
        lengths=plan.lengths,
        global_size=4,
        conflict_pairs=plan.conflict_pairs,
    )
    assert verify_plan(dag, broken)


def test_plans_for_canonical_operators_are_sound(corpus, rng):
    for name, problem in corpus:
        dag = canonicalize(problem).G
        x = rng.standard_normal(dag.input_size)
        reference = evaluate(dag, [x], plan_memory(dag, alias=False))[0]
        for options in ({}, {"parallel": True}):
            plan = plan_memory(dag, **options)
            assert verify_plan(dag, plan) == [], name
            out = evaluate(dag, [x], plan)[0]
            np.testing.assert_allclose(out, reference, rtol=1e-12, atol=1e-12, err_msg=name)
