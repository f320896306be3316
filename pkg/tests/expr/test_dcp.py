"""Curvature and sign analysis under the DCP composition rule."""

from __future__ import annotations

import numpy as np
import pytest

from matfree.expr import (
    Curvature,
    Sign,
    absolute,
    analyze,
    constant,
    conv,
    curvature_of,
    dft,
    eq,
    geq,
    leq,
    matmul,
    minimize,
    norm1,
    norm2,
    sum_entries,
    sum_squares,
    validate_dcp,
    variable,
)


def test_constant_expression_is_constant():
    curvature, sign = curvature_of(constant([1.0, 2.0]) + constant([3.0, 4.0]))
    assert curvature is Curvature.CONSTANT
    assert sign is Sign.NONNEG


def test_sum_squares_of_affine_is_convex():
    x = variable("x", 3)
    curvature, sign = curvature_of(sum_squares(matmul(np.ones((2, 3)), x) - 1.0))
    assert curvature is Curvature.CONVEX
    assert sign is Sign.NONNEG


def test_negated_norm_is_concave():
    curvature, _ = curvature_of(-norm2(variable("x", 3)))
    assert curvature is Curvature.CONCAVE


@pytest.mark.parametrize(
    ("build", "expected"),
    [
        (lambda x: x, Curvature.AFFINE),
        (lambda x: dft(x), Curvature.AFFINE),
        (lambda x: norm1(x) + norm2(x), Curvature.CONVEX),
        (lambda x: sum_entries(absolute(x)), Curvature.CONVEX),
        (lambda x: 3 * sum_squares(x), Curvature.CONVEX),
        (lambda x: norm1(x) - norm2(x), Curvature.UNKNOWN),
        (lambda x: sum_squares(absolute(x)), Curvature.CONVEX),
        (lambda x: norm2(-1 * absolute(x)), Curvature.CONVEX),
        (lambda x: norm2(-1 * absolute(x) + 1.0), Curvature.UNKNOWN),
        (lambda x: matmul(np.ones((1, 4)), absolute(x)), Curvature.CONVEX),
        (lambda x: matmul(-np.ones((1, 4)), absolute(x)), Curvature.CONCAVE),
        (lambda x: matmul(np.array([[1.0, -1.0, 0.0, 0.0]]), absolute(x)), Curvature.UNKNOWN),
    ],
)
def test_composition_rule(build, expected):
    x = variable("x", 4)
    assert curvature_of(build(x))[0] is expected


def test_magnitude_atoms_follow_argument_sign():
    x = variable("x", 4)
    assert curvature_of(norm2(absolute(x) + 1.0))[0] is Curvature.CONVEX
    # concave with unknown sign: norm2 has no monotonicity there
    assert curvature_of(norm2(1.0 - absolute(x)))[0] is Curvature.UNKNOWN


def test_nonnegative_kernel_keeps_convexity():
    x = variable("x", 6)
    assert curvature_of(sum_entries(conv([1.0, 2.0], absolute(x))))[0] is Curvature.CONVEX
    assert curvature_of(sum_entries(conv([1.0, -2.0], absolute(x))))[0] is Curvature.UNKNOWN


def test_analyze_annotates_every_node():
    x = variable("x", 2)
    expr = norm2(x) + 1.0
    notes = analyze(expr)
    assert {node.id for node in expr.walk()} == set(notes)
    assert notes[x.id].curvature is Curvature.AFFINE


def test_deconvolution_problem_is_dcp():
    x = variable("x", 8)
    kernel = np.array([0.25, 0.5, 0.25])
    problem = minimize(sum_squares(conv(kernel, x) - np.ones(10)), [geq(x, 0.0)])
    assert validate_dcp(problem).ok


def test_concave_objective_is_rejected():
    problem = minimize(-sum_squares(variable("x", 2)))
    report = validate_dcp(problem)
    assert not report.ok
    (violation,) = report.violations
    assert violation.location == "objective"
    assert violation.curvature is Curvature.CONCAVE
    assert "objective" in str(report)


def test_norm_below_affine_is_dcp():
    x, t = variable("x", 3), variable("t", 1)
    assert validate_dcp(minimize(t, [leq(norm2(x), t)])).ok


def test_norm_above_constant_is_rejected():
    x = variable("x", 3)
    report = validate_dcp(minimize(sum_entries(x), [geq(norm2(x), 1.0)]))
    assert [v.location for v in report.violations] == ["constraint 0"]


def test_nonlinear_equality_is_rejected():
    x = variable("x", 2)
    report = validate_dcp(minimize(sum_entries(x), [eq(norm1(x), 1.0)]))
    assert report.violations[0].location == "constraint 0"
