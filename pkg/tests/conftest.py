from __future__ import annotations

from collections.abc import Callable, Iterator

import numpy as np
import pytest
import scipy.sparse as sp

from matfree.config.settings import get_config
from matfree.expr import (
    absolute,
    conv,
    dft,
    dwt,
    eq,
    geq,
    leq,
    mat,
    matmul,
    matrix_product,
    minimize,
    norm1,
    norm2,
    soc,
    split,
    sum_entries,
    sum_squares,
    variable,
    vec,
    vstack,
)
from matfree.expr.problem import Opr
from matfree.fao import (
    Convolution,
    Copy,
    DenseMatrix,
    Dft,
    FaoDag,
    Identity,
    ScalarMult,
    Split,
    Sum,
    VStack,
)
from matfree.fao.base import Fao
from matfree.metrics import get_metrics, reset_metrics


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(20240601)


@pytest.fixture(autouse=True)
def fresh_state() -> Iterator[None]:
    """Every test starts with zeroed counters and configuration re-read from the environment."""
    reset_metrics()
    get_config.cache_clear()
    yield
    get_config.cache_clear()


@pytest.fixture()
def metrics():
    return get_metrics()


# ---- random dags ----


def _square_atom(rng: np.random.Generator, n: int) -> Fao:
    choice = rng.integers(0, 4)
    if choice == 0:
        return ScalarMult(float(rng.uniform(-2, 2)), n)
    if choice == 1:
        return DenseMatrix(rng.standard_normal((n, n)))
    if choice == 2 and n % 2 == 0:
        return Dft(n)
    if choice == 3:
        return Convolution("circular", rng.standard_normal(n), n)
    return Identity(n)


def _split_stack(dag: FaoDag, rng: np.random.Generator, src: int, m: int) -> int:
    head = int(rng.integers(1, m))
    parts = [head, m - head]
    split = dag.add_node(Split(parts))
    stack = dag.add_node(VStack(parts))
    dag.connect(src, 0, split, 0)
    for port, size in enumerate(parts):
        (atom,) = dag.chain(_square_atom(rng, size))
        dag.connect(split, port, atom, 0)
        dag.connect(atom, 0, stack, port)
    return stack


def _copy_sum(dag: FaoDag, rng: np.random.Generator, src: int, m: int) -> int:
    copy = dag.add_node(Copy(2, m))
    total = dag.add_node(Sum(2, m))
    dag.connect(src, 0, copy, 0)
    for port in range(2):
        (atom,) = dag.chain(_square_atom(rng, m))
        dag.connect(copy, port, atom, 0)
        dag.connect(atom, 0, total, port)
    return total


def build_random_dag(rng: np.random.Generator, max_nodes: int = 6) -> FaoDag:
    """copy -> branches of single-port atoms -> sum.

    The branches hold at most ``max_nodes - 2`` single-port atoms between them; a branch may
    also end in a split/vstack or copy/sum diamond.
    """
    n = int(rng.integers(2, 7))
    m = int(rng.integers(2, 7))
    budget = max_nodes - 2
    branches = int(rng.integers(1, min(3, budget) + 1))
    lengths = [1] * branches
    for _ in range(int(rng.integers(0, budget - branches + 1))):
        lengths[int(rng.integers(0, branches))] += 1

    dag = FaoDag()
    start = dag.add_node(Copy(branches, n))
    end = dag.add_node(Sum(branches, m))
    for port, length in enumerate(lengths):
        atoms = [DenseMatrix(rng.standard_normal((m, n)))]
        atoms += [_square_atom(rng, m) for _ in range(length - 1)]
        ids = dag.chain(*atoms)
        dag.connect(start, port, ids[0], 0)
        tail = ids[-1]
        diamond = int(rng.integers(0, 3))
        if diamond == 1:
            tail = _split_stack(dag, rng, tail, m)
        elif diamond == 2:
            tail = _copy_sum(dag, rng, tail, m)
        dag.connect(tail, 0, end, port)
    return dag


@pytest.fixture()
def random_dag() -> Callable[[np.random.Generator, int], FaoDag]:
    return build_random_dag


# ---- problem corpus ----


def build_corpus(seed: int = 7) -> list[tuple[str, Opr]]:
    """Small DCP problems covering every atom the canonicalizer handles."""
    rng = np.random.default_rng(seed)
    corpus: list[tuple[str, Opr]] = []

    x = variable("x", 6)
    A = rng.standard_normal((8, 6))
    b = rng.standard_normal(8)
    corpus.append(("least_squares", minimize(sum_squares(matmul(A, x) - b))))
    corpus.append(("nnls", minimize(sum_squares(matmul(A, x) - b), [geq(x, 0.0)])))
    corpus.append(("lasso", minimize(sum_squares(matmul(A, x) - b) + 0.5 * norm1(x))))
    corpus.append(("lp_box", minimize(
        matmul(rng.standard_normal((1, 6)), x), [leq(x, 1.0), geq(x, -1.0)]
    )))
    corpus.append(("norm2_fit", minimize(norm2(matmul(A, x) - b))))
    corpus.append(("abs_sum", minimize(sum_entries(absolute(matmul(A, x) - b)))))
    corpus.append(("equality", minimize(
        sum_squares(x), [eq(matmul(rng.standard_normal((2, 6)), x), rng.standard_normal(2))]
    )))

    t = variable("t", 1)
    corpus.append(("soc_epigraph", minimize(t, [soc(matmul(A, x) - b, t)])))

    sparse = sp.random(8, 6, density=0.4, random_state=seed, format="csr")
    corpus.append(("sparse_matmul", minimize(sum_squares(matmul(sparse, x) - b))))
    low_rank = (rng.standard_normal((8, 2)), rng.standard_normal((2, 6)))
    corpus.append(("low_rank_matmul", minimize(norm1(matmul(low_rank, x) - b))))

    kernel = rng.standard_normal(4)
    corpus.append(("column_conv", minimize(
        sum_squares(conv(kernel, x) - rng.standard_normal(9)), [geq(x, 0.0)]
    )))
    corpus.append(("row_conv", minimize(norm1(conv(kernel, x, "row") - rng.standard_normal(3)))))
    corpus.append(("circular_conv", minimize(
        norm2(conv(rng.standard_normal(6), x, "circular") - rng.standard_normal(6))
    )))

    z = variable("z", 8)
    corpus.append(("dft", minimize(sum_squares(dft(z) - rng.standard_normal(8)), [geq(z, -1.0)])))
    corpus.append(("dwt_sparsity", minimize(
        norm1(dwt(z)), [eq(sum_entries(z), 1.0), geq(z, 0.0)]
    )))

    X = variable("X", (3, 2))
    left, right = rng.standard_normal((4, 3)), rng.standard_normal((2, 2))
    corpus.append(("matrix_product", minimize(
        sum_squares(vec(matrix_product(left, X, right)) - rng.standard_normal(8))
    )))
    corpus.append(("vec_mat", minimize(
        norm1(vec(X)), [eq(mat(matmul(A[:6, :], x), 3, 2), rng.standard_normal((3, 2)))]
    )))
    image = variable("Y", (4, 4))
    corpus.append(("conv_2d", minimize(
        sum_squares(vec(conv(rng.standard_normal((2, 2)), image) - rng.standard_normal((5, 5))))
    )))

    head, tail = split(x, [2, 4])
    corpus.append(("split_parts", minimize(
        norm2(head) + sum_squares(tail), [geq(sum_entries(head), 1.0)]
    )))
    shared = matmul(A, x) - b
    corpus.append(("shared_subexpression", minimize(
        sum_squares(shared) + norm1(shared), [leq(vstack(x, t), 2.0)]
    )))
    w = variable("w", 3)
    B, C = rng.standard_normal((5, 6)), rng.standard_normal((5, 3))
    corpus.append(("two_variables", minimize(
        sum_squares(matmul(B, x) + matmul(C, w)),
        [eq(sum_entries(w), 1.0), geq(w, 0.0), leq(norm2(x), 3.0)],
    )))
    return corpus


@pytest.fixture(scope="session")
def corpus() -> list[tuple[str, Opr]]:
    return build_corpus()
