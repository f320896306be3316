"""Tests for the elementary forward-adjoint oracles."""

from __future__ import annotations

import numpy as np
import pytest
import scipy.sparse as sp

from matfree.fao import (
    DimensionError,
    SingularMatrixError,
    apply_adjoint,
    apply_forward,
    make_copy,
    make_matrix_mult,
    make_matrix_product,
    make_prng_matrix,
    make_split,
    make_sum,
    make_tri_solve,
    make_vec_mat,
    make_vstack,
)
from matfree.fao.atoms import Identity, Mat, ScalarMult, SumEntries, ZeroMap


def _inner(left, right) -> float:
    return sum(float(np.vdot(np.ravel(a, order="F"), np.ravel(b, order="F")))
               for a, b in zip(left, right))


def _random_like(rng, shapes):
    return [rng.standard_normal(s.total) for s in shapes]


def _dot_gap(fao, rng) -> tuple[float, float]:
    x = _random_like(rng, fao.in_shapes)
    y = _random_like(rng, fao.out_shapes)
    lhs = _inner(apply_forward(fao, x), y)
    rhs = _inner(x, apply_adjoint(fao, y))
    scale = np.sqrt(_inner(x, x) * _inner(y, y))
    return abs(lhs - rhs), scale


def _catalog(rng):
    lower = sp.csr_matrix(np.tril(rng.standard_normal((5, 5)), k=-1) + 5 * np.eye(5))
    return [
        ScalarMult(-1.5, 4),
        Identity((2, 3)),
        ZeroMap(3, 2),
        SumEntries(5),
        make_matrix_mult("dense", rng.standard_normal((4, 3))),
        make_matrix_mult("sparse", sp.random(6, 5, density=0.5, random_state=3)),
        make_matrix_mult("low-rank", (rng.standard_normal((5, 2)), rng.standard_normal((2, 4)))),
        make_tri_solve(lower),
        make_prng_matrix(11, 7, 9, block_entries=20),
        make_sum(3, 4),
        make_copy(3, 4),
        make_vstack([2, 3, (2, 2)]),
        make_split([3, 1]),
        make_vec_mat(3, 2),
        Mat(2, 3),
        make_matrix_product(rng.standard_normal((4, 3)), rng.standard_normal((2, 5))),
    ]


def test_scalar_mult_forward_and_adjoint():
    fao = ScalarMult(2.0, 2)
    np.testing.assert_array_equal(apply_forward(fao, [[1.0, -3.0]])[0], [2.0, -6.0])
    np.testing.assert_array_equal(apply_adjoint(fao, [[1.0, 0.0]])[0], [2.0, 0.0])
    assert fao.adjoint_fao() is fao


def test_dense_forward_and_adjoint():
    fao = make_matrix_mult("dense", [[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal(apply_forward(fao, [[1.0, 1.0]])[0], [3.0, 7.0])
    np.testing.assert_array_equal(apply_adjoint(fao, [[1.0, 0.0]])[0], [1.0, 2.0])


def test_sum_and_copy_are_mutual_adjoints():
    total = make_sum(2, 2)
    np.testing.assert_array_equal(apply_forward(total, [[1.0, 2.0], [3.0, 4.0]])[0], [4.0, 6.0])
    copies = apply_adjoint(total, [[4.0, 6.0]])
    assert len(copies) == 2
    for copy in copies:
        np.testing.assert_array_equal(copy, [4.0, 6.0])
    assert total.adjoint_fao().kind == "copy"
    assert make_copy(2, 2).adjoint_fao().kind == "sum"


def test_copy_outputs_k_copies():
    outputs = apply_forward(make_copy(3, 1), [[7.0]])
    assert [list(out) for out in outputs] == [[7.0], [7.0], [7.0]]


def test_sum_of_one_is_identity(rng):
    x = rng.standard_normal(5)
    np.testing.assert_array_equal(apply_forward(make_sum(1, 5), [x])[0], x)


@pytest.mark.parametrize("k", [0, -1])
def test_sum_and_copy_reject_nonpositive_k(k):
    with pytest.raises(ValueError):
        make_sum(k, 3)
    with pytest.raises(ValueError):
        make_copy(k, 3)


def test_low_rank_applies_factors():
    fao = make_matrix_mult("low-rank", ([[1.0], [1.0]], [[1.0, 1.0]]))
    np.testing.assert_array_equal(apply_forward(fao, [[1.0, 2.0]])[0], [3.0, 3.0])
    assert fao.scratch_size == 1


def test_low_rank_rejects_inconsistent_factors():
    with pytest.raises(DimensionError):
        make_matrix_mult("low-rank", (np.ones((2, 2)), np.ones((3, 2))))


def test_sparse_identity_and_triplet_form():
    fao = make_matrix_mult("sparse", sp.identity(3))
    np.testing.assert_array_equal(apply_forward(fao, [[5.0, 6.0, 7.0]])[0], [5.0, 6.0, 7.0])

    triplet = make_matrix_mult(
        "sparse", ([1.0, 2.0, 3.0], [0, 1, 1], [1, 0, 2]), shape=(2, 3)
    )
    dense = make_matrix_mult("dense", [[0.0, 1.0, 0.0], [2.0, 0.0, 3.0]])
    x = [1.0, -1.0, 2.0]
    np.testing.assert_allclose(apply_forward(triplet, [x])[0], apply_forward(dense, [x])[0])


def test_sparse_triplet_needs_shape():
    with pytest.raises(DimensionError):
        make_matrix_mult("sparse", ([1.0], [0], [0]))


def test_unknown_matrix_variant():
    with pytest.raises(ValueError):
        make_matrix_mult("banded", np.eye(2))


def test_dense_dot_test(rng):
    A = rng.standard_normal((4, 3))
    fao = make_matrix_mult("dense", A)
    gap, scale = _dot_gap(fao, rng)
    assert gap <= 1e-10 * scale * np.linalg.norm(A, 2)


def test_every_atom_passes_dot_test(rng):
    for fao in _catalog(rng):
        for _ in range(100):
            gap, scale = _dot_gap(fao, rng)
            opnorm = max(1.0, float(abs(fao.coefficient(0, 0)).max()) * 10)
            assert gap <= 1e-8 * (1 + scale) * opnorm, fao


def test_atoms_are_linear(rng):
    for fao in _catalog(rng):
        x = _random_like(rng, fao.in_shapes)
        z = _random_like(rng, fao.in_shapes)
        combined = [2.0 * a - 0.5 * b for a, b in zip(x, z)]
        lhs = apply_forward(fao, combined)
        rhs = [
            2.0 * a - 0.5 * b for a, b in zip(apply_forward(fao, x), apply_forward(fao, z))
        ]
        for left, right in zip(lhs, rhs):
            np.testing.assert_allclose(left, right, rtol=1e-10, atol=1e-10)


def test_coefficient_matches_unit_vector_images(rng):
    for fao in _catalog(rng):
        matrix = fao.coefficient(0, 0).toarray()
        n = fao.in_shapes[0].total
        columns = []
        for k in range(n):
            inputs = [np.zeros(s.total) for s in fao.in_shapes]
            inputs[0][k] = 1.0
            columns.append(np.ravel(apply_forward(fao, inputs)[0], order="F"))
        np.testing.assert_allclose(matrix, np.column_stack(columns), atol=1e-12)


def test_triangular_solve():
    fao = make_tri_solve(sp.csr_matrix([[1.0, 0.0], [1.0, 1.0]]))
    np.testing.assert_allclose(apply_forward(fao, [[1.0, 1.0]])[0], [1.0, 0.0])
    identity = make_tri_solve(sp.identity(3))
    np.testing.assert_allclose(apply_forward(identity, [[1.0, 2.0, 3.0]])[0], [1.0, 2.0, 3.0])


def test_triangular_solve_residual(rng):
    L = np.tril(rng.standard_normal((20, 20)), k=-1) + np.diag(rng.uniform(2.0, 3.0, 20))
    fao = make_tri_solve(sp.csr_matrix(L))
    x = rng.standard_normal(20)
    y = apply_forward(fao, [x])[0]
    assert np.linalg.norm(L @ y - x) <= 1e-10 * np.linalg.norm(x)
    u = apply_adjoint(fao, [x])[0]
    assert np.linalg.norm(L.T @ u - x) <= 1e-10 * np.linalg.norm(x)


def test_triangular_solve_rejects_zero_diagonal():
    with pytest.raises(SingularMatrixError):
        make_tri_solve(sp.csr_matrix([[1.0, 0.0], [1.0, 0.0]]))


def test_prng_matrix_is_deterministic_and_matches_stream(rng):
    x = rng.standard_normal(30)
    first = make_prng_matrix(5, 12, 30)
    second = make_prng_matrix(5, 12, 30, block_entries=25)
    np.testing.assert_array_equal(apply_forward(first, [x])[0], apply_forward(first, [x])[0])
    np.testing.assert_allclose(apply_forward(first, [x])[0], apply_forward(second, [x])[0])
    dense = first.to_dense()
    assert np.all(np.abs(dense) <= 1.0)
    np.testing.assert_allclose(apply_forward(first, [x])[0], dense @ x, rtol=1e-12, atol=1e-12)
    y = rng.standard_normal(12)
    np.testing.assert_allclose(apply_adjoint(first, [y])[0], dense.T @ y, rtol=1e-12, atol=1e-12)


def test_prng_seed_changes_output(rng):
    x = rng.standard_normal(16)
    a = apply_forward(make_prng_matrix(1, 8, 16), [x])[0]
    b = apply_forward(make_prng_matrix(2, 8, 16), [x])[0]
    assert not np.allclose(a, b)


def test_vstack_and_split():
    stacked = apply_forward(make_vstack([1, 2]), [[1.0], [2.0, 3.0]])[0]
    np.testing.assert_array_equal(stacked, [1.0, 2.0, 3.0])
    parts = apply_forward(make_split([1, 2]), [[1.0, 2.0, 3.0]])
    np.testing.assert_array_equal(parts[0], [1.0])
    np.testing.assert_array_equal(parts[1], [2.0, 3.0])


def test_split_inverts_vstack(rng):
    parts = [rng.standard_normal(3), rng.standard_normal(4)]
    stacked = apply_forward(make_vstack([3, 4]), parts)
    recovered = apply_forward(make_split([3, 4]), stacked)
    for original, back in zip(parts, recovered):
        np.testing.assert_array_equal(original, back)


def test_vstack_needs_parts():
    with pytest.raises(ValueError):
        make_vstack([])


def test_vec_and_mat():
    vec = make_vec_mat(2, 2)
    X = np.array([[1.0, 3.0], [2.0, 4.0]])
    np.testing.assert_array_equal(apply_forward(vec, [X])[0], [1.0, 2.0, 3.0, 4.0])
    np.testing.assert_array_equal(apply_adjoint(vec, [[1.0, 2.0, 3.0, 4.0]])[0], X)
    assert vec.adjoint_fao().kind == "mat"


def test_mat_inverts_vec(rng):
    X = rng.standard_normal((3, 2))
    vec = make_vec_mat(3, 2)
    back = apply_forward(vec.adjoint_fao(), apply_forward(vec, [X]))[0]
    np.testing.assert_array_equal(back, X)


def test_matrix_product_identity_factors(rng):
    X = rng.standard_normal((3, 4))
    fao = make_matrix_product(np.eye(3), np.eye(4))
    np.testing.assert_allclose(apply_forward(fao, [X])[0], X)


@pytest.mark.parametrize("dims", [(3, 3, 3, 3), (2, 5, 3, 6), (6, 2, 5, 1)])
def test_matrix_product_matches_kronecker(rng, dims):
    s, p, q, t = dims
    A, B = rng.standard_normal((s, p)), rng.standard_normal((q, t))
    fao = make_matrix_product(A, B)
    X = rng.standard_normal((p, q))
    expected = np.kron(B.T, A) @ X.ravel(order="F")
    np.testing.assert_allclose(
        np.ravel(apply_forward(fao, [X])[0], order="F"), expected, rtol=1e-10
    )
    U = rng.standard_normal((s, t))
    np.testing.assert_allclose(apply_adjoint(fao, [U])[0], A.T @ U @ B.T, rtol=1e-10)


def test_matrix_product_ordering_rule():
    # 1/t + 1/p < 1/s + 1/q selects A first
    wide = make_matrix_product(np.ones((2, 8)), np.ones((2, 8)))
    assert wide.left_first
    narrow = make_matrix_product(np.ones((8, 2)), np.ones((8, 2)))
    assert not narrow.left_first


def test_shape_mismatch_raises_dimension_error():
    fao = make_matrix_mult("dense", np.ones((2, 3)))
    with pytest.raises(DimensionError):
        apply_forward(fao, [[1.0, 2.0]])
    with pytest.raises(DimensionError):
        apply_forward(fao, [[1.0, 2.0, 3.0], [1.0]])


def test_small_scratch_is_rejected():
    fao = make_matrix_mult("low-rank", (np.ones((3, 2)), np.ones((2, 3))))
    with pytest.raises(DimensionError):
        apply_forward(fao, [np.ones(3)], scratch=np.empty(1))


def test_non_finite_inputs_propagate():
    fao = ScalarMult(2.0, 2)
    out = apply_forward(fao, [[np.nan, 1.0]])[0]
    assert np.isnan(out[0]) and out[1] == 2.0
