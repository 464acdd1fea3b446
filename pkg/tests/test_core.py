import numpy as np
import pytest
from numpy.testing import assert_allclose

from sbsskrige import (DegenerateSampleError, LocationSet, MultiField,
                       SingularCovarianceError, pairwise_distances,
                       sample_covariance, whiten)


def test_pairwise_345_triangle():
    locs = LocationSet([[0.0, 0.0], [3.0, 4.0]])
    d = pairwise_distances(locs)
    assert d[0, 1] == 5.0
    assert d[1, 0] == 5.0
    assert d[0, 0] == 0.0


def test_pairwise_single_site():
    d = pairwise_distances(LocationSet([[1.0, 2.0]]))
    assert d.shape == (1, 1)
    assert d[0, 0] == 0.0


def test_pairwise_unit_square_diagonal():
    locs = LocationSet([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    assert_allclose(pairwise_distances(locs)[1, 2], np.sqrt(2.0))


def test_pairwise_triangle_inequality_sampled():
    rng = np.random.default_rng(0)
    locs = LocationSet(rng.uniform(0, 10, (40, 3)))
    d = locs.dist
    idx = rng.integers(0, 40, size=(200, 3))
    for i, j, k in idx:
        assert d[i, j] <= d[i, k] + d[k, j] + 1e-12


def test_distance_cache_is_immutable_and_reused():
    locs = LocationSet(np.random.default_rng(1).normal(size=(5, 2)))
    d1 = locs.dist
    assert locs.dist is d1
    with pytest.raises(ValueError):
        d1[0, 1] = 3.0


def test_location_validation():
    with pytest.raises(ValueError):
        LocationSet(np.array([[np.nan, 0.0]]))
    with pytest.raises(ValueError):
        LocationSet(np.empty((0, 2)))


def test_multifield_validation():
    locs = LocationSet([[0.0, 0.0], [1.0, 1.0]])
    with pytest.raises(ValueError):
        MultiField(locs, [[1.0], [2.0], [3.0]])
    with pytest.raises(ValueError):
        MultiField(locs, [[1.0], [np.inf]])


def test_sample_covariance_constant_field_is_zero():
    locs = LocationSet(np.arange(8, dtype=float).reshape(4, 2))
    field = MultiField(locs, np.full((4, 2), 3.7))
    assert_allclose(sample_covariance(field), np.zeros((2, 2)))


def test_sample_covariance_hand_example():
    locs = LocationSet([[0.0, 0.0], [1.0, 0.0]])
    field = MultiField(locs, [[1.0, 0.0], [-1.0, 0.0]])
    assert_allclose(sample_covariance(field), [[1.0, 0.0], [0.0, 0.0]])


def test_sample_covariance_monte_carlo_identity():
    rng = np.random.default_rng(42)
    locs = LocationSet(rng.uniform(0, 1, (1000, 2)))
    field = MultiField(locs, rng.standard_normal((1000, 2)))
    cov = sample_covariance(field)
    assert np.max(np.abs(cov - np.eye(2))) < 0.15


def test_sample_covariance_row_permutation_invariant():
    rng = np.random.default_rng(3)
    locs = LocationSet(rng.uniform(0, 1, (30, 2)))
    values = rng.normal(size=(30, 3))
    perm = rng.permutation(30)
    c1 = sample_covariance(MultiField(locs, values))
    c2 = sample_covariance(MultiField(locs, values[perm]))
    assert_allclose(c1, c2, atol=1e-12)


def test_sample_covariance_needs_two_sites():
    field = MultiField(LocationSet([[0.0, 0.0]]), [[1.0]])
    with pytest.raises(DegenerateSampleError):
        sample_covariance(field)


def test_whiten_identity_covariance_input():
    # four-point construction with sample covariance exactly the identity
    a = np.sqrt(2.0)
    locs = LocationSet(np.arange(8, dtype=float).reshape(4, 2))
    field = MultiField(locs, [[a, 0.0], [-a, 0.0], [0.0, a], [0.0, -a]])
    white = whiten(field)
    assert_allclose(white.whitener, np.eye(2), atol=1e-10)


def test_whiten_scaled_coordinate():
    # sample covariance diag(9, 1) exactly -> whitener diag(1/3, 1)
    a, b = np.sqrt(18.0), np.sqrt(2.0)
    locs = LocationSet(np.arange(8, dtype=float).reshape(4, 2))
    field = MultiField(locs, [[a, 0.0], [-a, 0.0], [0.0, b], [0.0, -b]])
    white = whiten(field)
    assert_allclose(white.whitener, np.diag([1.0 / 3.0, 1.0]), atol=1e-10)


def test_whiten_output_covariance_is_identity():
    rng = np.random.default_rng(7)
    locs = LocationSet(rng.uniform(0, 5, (200, 2)))
    field = MultiField(locs, rng.normal(size=(200, 4)) @ rng.normal(size=(4, 4)))
    white = whiten(field)
    assert_allclose(sample_covariance(white.field), np.eye(4), atol=1e-8)
    assert_allclose(white.whitener @ white.dewhitener, np.eye(4), atol=1e-8)


def test_whiten_dewhiten_round_trip():
    rng = np.random.default_rng(8)
    locs = LocationSet(rng.uniform(0, 5, (50, 2)))
    field = MultiField(locs, rng.normal(size=(50, 3)))
    white = whiten(field)
    assert_allclose(white.dewhiten(white.field.values), field.values, atol=1e-8)


def test_whiten_singular_covariance_names_eigenvalue():
    locs = LocationSet(np.arange(6, dtype=float).reshape(3, 2))
    values = np.array([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]])  # rank one
    with pytest.raises(SingularCovarianceError, match="eigenvalue"):
        whiten(MultiField(locs, values))
