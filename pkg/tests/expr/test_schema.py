"""JSON problem files."""

from __future__ import annotations

import json

import numpy as np
import pytest

from matfree.expr import (
    ProblemSchemaError,
    dump_problem,
    dumps_problem,
    load_problem,
)

DECONV_DOCUMENT = {
    "variables": [{"name": "x", "shape": [8]}],
    "constants": [
        {"name": "c", "shape": [3], "values": [1, 2, 1]},
        {"name": "b", "shape": [10], "generator": {"kind": "normal", "seed": 1}},
    ],
    "objective": {
        "op": "sum_squares",
        "args": [
            {
                "op": "sub",
                "args": [
                    {
                        "op": "conv",
                        "args": [{"op": "variable", "data": "x"}],
                        "data": {"kernel": "c", "variant": "column"},
                    },
                    {"op": "constant", "data": "b"},
                ],
            }
        ],
    },
    "constraints": [{"expr": {"op": "variable", "data": "x"}, "cone": "nonneg"}],
}


def test_load_document():
    problem = load_problem(DECONV_DOCUMENT)
    assert [v.name for v in problem.variables] == ["x"]
    assert problem.objective.op == "sum_squares"
    (constraint,) = problem.constraints
    assert constraint.cone == "nonneg"
    conv = next(node for node in problem.objective.walk() if node.op == "conv")
    assert conv.data[0] == "column"
    np.testing.assert_array_equal(conv.data[1], [1.0, 2.0, 1.0])
    b = next(node for node in problem.objective.walk() if node.op == "constant")
    np.testing.assert_array_equal(b.data, np.random.default_rng(1).standard_normal(10))


def test_load_from_file_and_string(tmp_path):
    path = tmp_path / "deconv.json"
    path.write_text(json.dumps(DECONV_DOCUMENT), encoding="utf-8")
    from_file = load_problem(path)
    from_text = load_problem(json.dumps(DECONV_DOCUMENT))
    assert dump_problem(from_file) == dump_problem(from_text)


def test_matrix_constants_accept_rows_or_column_major():
    document = {
        "variables": [{"name": "X", "shape": [2, 2]}],
        "constants": [
            {"name": "rows", "shape": [2, 2], "values": [[1, 3], [2, 4]]},
            {"name": "flat", "shape": [2, 2], "values": [1, 2, 3, 4]},
        ],
        "objective": {
            "op": "sum_entries",
            "args": [{"op": "vec", "args": [{"op": "variable", "data": "X"}]}],
        },
        "constraints": [
            {
                "expr": {
                    "op": "matrix_product",
                    "args": [{"op": "variable", "data": "X"}],
                    "data": {"left": "rows", "right": "flat"},
                },
                "cone": "nonneg",
            }
        ],
    }
    problem = load_problem(document)
    left, right = problem.constraints[0].expr.data
    np.testing.assert_array_equal(left, right)


@pytest.mark.parametrize(
    "name",
    [
        "least_squares",
        "nnls",
        "lasso",
        "column_conv",
        "matrix_product",
        "split_parts",
        "dwt_sparsity",
    ],
)
def test_dump_is_a_fixed_point(corpus, name):
    problem = dict(corpus)[name]
    document = dump_problem(problem)
    reloaded = load_problem(json.loads(json.dumps(document)))
    assert dump_problem(reloaded) == document
    assert reloaded.variable_shapes == problem.variable_shapes


def test_sparse_and_low_rank_matrices_survive(corpus):
    for name in ("sparse_matmul", "low_rank_matmul"):
        problem = dict(corpus)[name]
        reloaded = load_problem(dumps_problem(problem))
        original = next(n for n in problem.objective.walk() if n.op == "matmul")
        again = next(n for n in reloaded.objective.walk() if n.op == "matmul")
        assert again.data[0] == original.data[0]


def test_info_is_written_as_plain_json(corpus):
    problem = dict(corpus)["nnls"]
    tagged = problem.with_parts(problem.objective, problem.constraints)
    tagged.info["truth"] = np.arange(3.0)
    assert dump_problem(tagged)["info"] == {"truth": [0.0, 1.0, 2.0]}


@pytest.mark.parametrize(
    ("mutate", "message"),
    [
        (lambda d: d["constraints"][0]["expr"].update(data="y"), "unknown variable"),
        (lambda d: d["objective"]["args"][0]["args"][1].update(data="missing"), "unknown constant"),
        (lambda d: d["constants"][0].update(generator={"kind": "ones"}), "invalid problem"),
        (lambda d: d["constraints"][0].update(cone="psd"), "invalid problem"),
        (lambda d: d["constants"][0].update(values=[1, 2]), "declared"),
        (lambda d: d["objective"].update(op="log_det"), "cannot build"),
    ],
)
def test_malformed_documents(mutate, message):
    document = json.loads(json.dumps(DECONV_DOCUMENT))
    mutate(document)
    with pytest.raises(ProblemSchemaError, match=message):
        load_problem(document)


def test_invalid_json_text():
    with pytest.raises(ProblemSchemaError):
        load_problem("{not json")
