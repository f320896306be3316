"""Deconvolution and Sylvester problem generators."""

from __future__ import annotations

import numpy as np
import pytest

from matfree.bench import gaussian_kernel, gen_deconv, gen_sylvester, generate, spike_clusters
from matfree.canon import canonicalize
from matfree.expr import dump_problem, validate_dcp


def test_gaussian_kernel_is_floored_and_centered():
    kernel = gaussian_kernel(64)
    assert kernel.shape == (64,)
    assert kernel.min() == 1e-6
    assert abs(kernel.sum() - 1.0) < 1e-4
    assert kernel.argmax() in (31, 32)
    np.testing.assert_allclose(kernel, kernel[::-1])


@pytest.mark.parametrize("n", [10, 20, 30, 40, 64, 256, 4096])
def test_gaussian_kernel_floor_binds_only_for_longer_kernels(n):
    kernel = gaussian_kernel(n)
    assert kernel.min() >= 1e-6
    if n >= 40:
        assert kernel.min() == 1e-6
    else:
        # short kernels have tails above the floor and stay exactly unit-sum
        assert kernel.min() > 1e-6
        assert kernel.sum() == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("seed", [0, 1, 2, 3])
def test_deconvolution_instance(seed):
    problem = gen_deconv(64, seed)
    info = problem.info
    assert np.count_nonzero(info["x_true"]) == 5
    assert info["x_true"].max() <= 6.4
    assert info["b"].shape == (127,)
    assert 15.0 <= info["snr"] <= 25.0
    assert problem.variable_shapes["x"].dims == (64,)
    assert [c.cone for c in problem.constraints] == ["nonneg"]
    assert validate_dcp(problem).ok


def test_generators_are_deterministic():
    first, again = gen_deconv(32, 7), gen_deconv(32, 7)
    np.testing.assert_array_equal(first.info["b"], again.info["b"])
    assert dump_problem(first)["constants"] == dump_problem(again)["constants"]
    assert not np.array_equal(first.info["b"], gen_deconv(32, 8).info["b"])
    np.testing.assert_array_equal(gen_sylvester(3, 1).info["A"], gen_sylvester(3, 1).info["A"])


def test_sylvester_instance():
    problem = gen_sylvester(3, 0)
    info = problem.info
    assert info["A"].shape == (15, 15)
    assert info["B"].shape == (3, 3)
    assert np.all(info["A"] > 0)
    assert np.all(info["B"] > 0)
    assert problem.variable_shapes["X"].total == 5 * 3**2
    assert validate_dcp(problem).ok

    program = canonicalize(problem)
    assert program.n == 45
    assert program.m == 90
    assert [cone.kind for cone in program.cones] == ["nonneg", "nonneg"]


def test_size_and_name_checks():
    with pytest.raises(ValueError):
        gen_deconv(9, 0)
    with pytest.raises(ValueError):
        gen_sylvester(1, 0)
    with pytest.raises(ValueError, match="unknown problem"):
        generate("lasso", 10, 0)
    assert generate("sylvester", 2, 0).info["q"] == 2


def test_spike_clusters_merge_adjacent_entries():
    x = np.array([0.0, 0.5, 2.0, 1.0, 0.0, 0.0, 3.0, 0.0, 1.0, 1.0])
    assert spike_clusters(x, 0.4) == [(2, 3.5), (6, 3.0), (8, 2.0)]
    assert spike_clusters(np.zeros(5), 0.1) == []
