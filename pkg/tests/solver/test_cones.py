"""Cone projections."""

from __future__ import annotations

import numpy as np
import pytest

from matfree.solver import Cone, ConeSizeError, distance, project, project_cones


def test_nonneg_projection():
    np.testing.assert_array_equal(project(Cone("nonneg", 2), np.array([-1.0, 2.0])), [0.0, 2.0])


def test_second_order_cone_projection():
    cone = Cone("soc", 3)
    inside = np.array([3.0, 4.0, 10.0])
    np.testing.assert_array_equal(project(cone, inside), inside)
    np.testing.assert_array_equal(project(cone, np.array([3.0, 4.0, -10.0])), np.zeros(3))
    np.testing.assert_allclose(project(cone, np.array([3.0, 4.0, 0.0])), [1.5, 2.0, 2.5])


def test_zero_and_free_cones():
    v = np.array([1.0, -2.0])
    np.testing.assert_array_equal(project(Cone("zero", 2), v), [0.0, 0.0])
    free = project(Cone("free", 2), v)
    np.testing.assert_array_equal(free, v)
    assert free is not v


def test_product_cone_projects_blockwise():
    cones = [Cone("zero", 1), Cone("nonneg", 2), Cone("soc", 3)]
    v = np.array([5.0, -1.0, 1.0, 3.0, 4.0, 0.0])
    np.testing.assert_allclose(project_cones(cones, v), [0.0, 0.0, 1.0, 1.5, 2.0, 2.5])
    out = np.empty(6)
    assert project_cones(cones, v, out) is out
    assert distance(cones, v) == pytest.approx(np.linalg.norm(v - out))


def test_projection_is_orthogonal(rng):
    cones = [Cone("nonneg", 4), Cone("soc", 5), Cone("zero", 2), Cone("soc", 2)]
    for _ in range(100):
        v = 3 * rng.standard_normal(13)
        p = project_cones(cones, v)
        np.testing.assert_allclose(project_cones(cones, p), p, atol=1e-12)
        assert abs((v - p) @ p) <= 1e-10 * max(1.0, v @ v)
        assert distance(cones, p) <= 1e-12


def test_invalid_cones_and_sizes():
    with pytest.raises(ValueError):
        Cone("psd", 3)
    with pytest.raises(ValueError):
        Cone("nonneg", 0)
    with pytest.raises(ConeSizeError):
        project(Cone("soc", 3), np.ones(2))
    with pytest.raises(ConeSizeError):
        project_cones([Cone("nonneg", 2)], np.ones(3))
