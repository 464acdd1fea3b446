import numpy as np
import pytest
from numpy.testing import assert_allclose

from sbsskrige import (LmcModel, LocationSet, Matern, Nugget, PmatModel,
                       SizeCapError, Spherical, Sum, build_joint_covariance,
                       lmc_cross_covariance, pmat_cross_covariance)

# frozen oracle values (computed with mpmath before the build)
RHO_12 = 0.94280904158206337   # shapes (0.25, 0.5), d = 2, beta = 1
RHO_13 = 0.8                   # shapes (0.25, 1.0), d = 2, beta = 1
MATERN_1_1_2_AT_HALF = 0.93675649361017791


def paper_pmat():
    return PmatModel(range_=2.0, shapes=(0.25, 0.5, 1.0), variances=(1.0, 1.0, 1.0),
                     beta=np.ones((3, 3)), ndim=2)


def test_spherical_boundaries():
    m = Spherical(1.0, 2.0)
    assert m.evaluate(0.0) == 1.0
    assert m.evaluate(2.0) == 0.0
    assert m.evaluate(5.0) == 0.0


def test_spherical_closed_form():
    assert_allclose(Spherical(1.0, 2.0).evaluate(1.0), 0.3125, rtol=0, atol=1e-15)


def test_matern_half_shape_is_exponential():
    m = Matern(1.0, 0.5, 2.0)
    for h in (0.5, 1.0, 3.0):
        assert_allclose(m.evaluate(h), np.exp(-h / 2.0), atol=1e-10)


def test_matern_at_zero_is_sill():
    assert Matern(2.5, 1.3, 0.7).evaluate(0.0) == 2.5


def test_matern_frozen_spot_value():
    assert_allclose(Matern(1.0, 1.0, 2.0).evaluate(0.5), MATERN_1_1_2_AT_HALF, atol=1e-12)


def test_nugget_indicator():
    m = Nugget(1.0)
    assert m.evaluate(0.0) == 1.0
    assert m.evaluate(1e-9) == 0.0


def test_sum_model_adds_parts():
    m = Sum((Spherical(1.0, 2.0), Nugget(0.5)))
    assert m.sill == 1.5
    assert_allclose(m.evaluate(1.0), 0.3125)
    assert_allclose(m.evaluate(0.0), 1.5)


def test_evaluate_rejects_bad_distances():
    m = Spherical(1.0, 2.0)
    with pytest.raises(ValueError):
        m.evaluate(-0.1)
    with pytest.raises(ValueError):
        m.evaluate(np.nan)


def test_parameter_validation():
    with pytest.raises(ValueError):
        Spherical(-1.0, 2.0)
    with pytest.raises(ValueError):
        Spherical(1.0, 0.0)
    with pytest.raises(ValueError):
        Matern(1.0, -0.5, 2.0)
    with pytest.raises(ValueError):
        Nugget(-0.1)


def test_monotone_nonincreasing_on_grid():
    grid = np.linspace(0.0, 6.0, 400)
    for model in (Spherical(1.0, 2.0), Matern(1.0, 0.5, 2.0), Matern(1.0, 2.5, 2.0)):
        vals = model.evaluate(grid)
        assert np.all(np.diff(vals) <= 1e-12)


def test_bessel_kv_accuracy_against_mpmath():
    import mpmath
    from scipy.special import kv

    mpmath.mp.dps = 30
    for nu in (0.1, 0.25, 0.5, 1.0, 1.5, 2.5, 3.7, 5.0):
        for x in (0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 25.0, 50.0):
            ours = kv(nu, x)
            exact = float(mpmath.besselk(nu, x))
            assert abs(ours - exact) <= 1e-10 * abs(exact), (nu, x)


def test_lmc_identity_structure_at_zero():
    lmc = LmcModel(((np.eye(2), Spherical(1.0, 2.0)),))
    assert_allclose(lmc_cross_covariance(lmc, 0.0), np.eye(2))


def test_lmc_nugget_structure_vanishes_off_site():
    t_nug = np.array([[0.5, 0.2], [0.2, 0.3]])
    lmc = LmcModel(((np.eye(2), Spherical(1.0, 2.0)), (t_nug, Nugget(1.0))))
    c_half = lmc_cross_covariance(lmc, 0.5)
    expected = np.eye(2) * Spherical(1.0, 2.0).evaluate(0.5)
    assert_allclose(c_half, expected)
    assert_allclose(lmc_cross_covariance(lmc, 0.0), np.eye(2) + t_nug)


def test_lmc_c0_dominates_ch():
    rng = np.random.default_rng(10)
    a = rng.normal(size=(3, 3))
    b = rng.normal(size=(3, 3))
    lmc = LmcModel(((a @ a.T, Spherical(1.0, 3.0)), (b @ b.T, Matern(1.0, 0.8, 1.5))))
    c0 = lmc_cross_covariance(lmc, 0.0)
    for h in np.linspace(0.1, 8.0, 25):
        diff = c0 - lmc_cross_covariance(lmc, h)
        assert np.linalg.eigvalsh(diff)[0] >= -1e-8


def test_lmc_validation():
    with pytest.raises(ValueError):
        LmcModel(((np.array([[1.0, 2.0], [2.0, 1.0]]), Spherical(1.0, 2.0)),))  # not PSD
    with pytest.raises(ValueError):
        LmcModel(((np.eye(2), Spherical(2.0, 2.0)),))  # sill != 1


def test_pmat_zero_beta_is_block_diagonal():
    m = PmatModel(range_=2.0, shapes=(0.5, 1.0), variances=(1.0, 2.0),
                  beta=np.eye(2), ndim=2)
    for h in (0.0, 0.7, 3.0):
        c = pmat_cross_covariance(m, h)
        assert c[0, 1] == 0.0
        assert c[1, 0] == 0.0


def test_pmat_paper_cross_correlations():
    m = paper_pmat()
    assert_allclose(m.cross_corr[0, 1], RHO_12, atol=1e-12)
    assert_allclose(m.cross_corr[0, 2], RHO_13, atol=1e-12)
    assert_allclose(m.cross_corr[1, 2], RHO_12, atol=1e-12)  # same averaged shape
    c0 = pmat_cross_covariance(m, 0.0)
    assert_allclose(np.diag(c0), np.ones(3))


def test_pmat_off_diagonal_uses_averaged_shape():
    m = paper_pmat()
    h = 1.3
    c = pmat_cross_covariance(m, h)
    # shapes (0.25, 1.0) average to 0.625
    from sbsskrige import matern_correlation

    assert_allclose(c[0, 2], RHO_13 * matern_correlation(h, 0.625, 2.0), atol=1e-12)


def test_pmat_joint_covariance_psd_on_random_sites():
    rng = np.random.default_rng(11)
    locs = LocationSet(rng.uniform(0, 35, (50, 2)))
    cov = build_joint_covariance(paper_pmat(), locs)
    assert np.linalg.eigvalsh(cov)[0] >= -1e-8


def test_pmat_validation():
    with pytest.raises(ValueError):
        PmatModel(range_=2.0, shapes=(0.5, 1.0), variances=(1.0, 1.0),
                  beta=np.array([[1.0, 0.5], [0.4, 1.0]]), ndim=2)  # asymmetric
    with pytest.raises(ValueError):
        PmatModel(range_=2.0, shapes=(0.5, 1.0), variances=(1.0, 1.0),
                  beta=np.array([[1.0, 2.0], [2.0, 1.0]]), ndim=2)  # not PSD


def test_build_joint_single_site():
    locs = LocationSet([[0.0, 0.0]])
    m = paper_pmat()
    assert_allclose(build_joint_covariance(m, locs), pmat_cross_covariance(m, 0.0))


def test_build_joint_coincident_sites_duplicate_blocks():
    locs = LocationSet([[1.0, 1.0], [1.0, 1.0]])
    lmc = LmcModel(((np.eye(2), Spherical(1.0, 2.0)),))
    cov = build_joint_covariance(lmc, locs)
    assert_allclose(cov[:2, 2:], cov[:2, :2])


def test_build_joint_matches_per_entry_loop():
    rng = np.random.default_rng(12)
    locs = LocationSet(rng.uniform(0, 10, (30, 2)))
    model = paper_pmat()
    cov = build_joint_covariance(model, locs)
    p = model.p
    # independent double loop over sites and variables
    for i in range(0, 30, 7):
        for j in range(0, 30, 5):
            h = np.linalg.norm(locs.coords[i] - locs.coords[j])
            block = pmat_cross_covariance(model, h)
            assert_allclose(cov[i * p:(i + 1) * p, j * p:(j + 1) * p], block, rtol=1e-12)


def test_build_joint_exactly_symmetric():
    rng = np.random.default_rng(13)
    locs = LocationSet(rng.uniform(0, 10, (20, 2)))
    cov = build_joint_covariance(paper_pmat(), locs)
    assert np.array_equal(cov, cov.T)
    a = rng.normal(size=(3, 3))
    lmc = LmcModel(((a @ a.T, Spherical(1.0, 3.0)),))
    cov2 = build_joint_covariance(lmc, locs)
    assert np.array_equal(cov2, cov2.T)


def test_build_joint_cap():
    locs = LocationSet(np.random.default_rng(14).uniform(0, 1, (30, 2)))
    with pytest.raises(SizeCapError, match="cap"):
        build_joint_covariance(paper_pmat(), locs, max_size=50)
