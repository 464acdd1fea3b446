"""Parametric covariance models.

Univariate building blocks (spherical, Matern, nugget, and sums thereof)
plus the two matrix-valued cross-covariance models: the linear model of
coregionalization and the parsimonious multivariate Matern.

All evaluations accept a scalar or an array of nonnegative distances and
are pure, so model objects are safe for concurrent use.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma as gamma_fn
from scipy.special import kv

from .errors import SizeCapError

DENSE_CAP = 12_000
PSD_TOL = -1e-10


def _check_distances(h):
    arr = np.asarray(h, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("distances must be finite")
    if np.any(arr < 0):
        raise ValueError("distances must be nonnegative")
    return arr


def matern_correlation(h, shape, range_):
    """Unit-sill Matern correlation; returns 1 at h = 0 by continuity."""
    x = np.asarray(h, dtype=float) / range_
    flat = np.atleast_1d(x).ravel()
    out = np.ones_like(flat)
    pos = flat > 0
    xp = flat[pos]
    out[pos] = xp**shape * kv(shape, xp) / (2.0 ** (shape - 1.0) * gamma_fn(shape))
    # kv underflows to 0 for large arguments, which is the correct limit
    return out.reshape(x.shape)


def spherical_correlation(h, range_):
    """Unit-sill spherical correlation with compact support [0, range_]."""
    x = np.asarray(h, dtype=float) / range_
    return np.where(x <= 1.0, 1.0 - 1.5 * x + 0.5 * x**3, 0.0)


class CovarianceModel:
    """Univariate stationary, isotropic covariance function C(h).

    Concrete models expose ``sill`` (the total variance C(0)) either as a
    field or a property.
    """

    def _evaluate(self, h):
        raise NotImplementedError

    def evaluate(self, h):
        """Covariance at nonnegative distance(s) ``h``.

        Scalar in, scalar out; array in, array out.  Raises ``ValueError``
        for negative or non-finite distances.
        """
        arr = _check_distances(h)
        out = self._evaluate(arr)
        if np.ndim(h) == 0:
            return float(out)
        return out


@dataclass(frozen=True)
class Spherical(CovarianceModel):
    """Spherical model: sill * (1 - 1.5 h/r + 0.5 (h/r)^3) for h <= r, else 0."""

    sill: float
    range_: float

    def __post_init__(self):
        if self.sill < 0:
            raise ValueError(f"sill must be nonnegative, got {self.sill}")
        if self.range_ <= 0:
            raise ValueError(f"range must be positive, got {self.range_}")

    def _evaluate(self, h):
        return self.sill * spherical_correlation(h, self.range_)


@dataclass(frozen=True)
class Matern(CovarianceModel):
    """Matern model sill/(2^(v-1) Gamma(v)) (h/r)^v K_v(h/r); sill at h = 0."""

    sill: float
    shape: float
    range_: float

    def __post_init__(self):
        if self.sill < 0:
            raise ValueError(f"sill must be nonnegative, got {self.sill}")
        if self.shape <= 0:
            raise ValueError(f"shape must be positive, got {self.shape}")
        if self.range_ <= 0:
            raise ValueError(f"range must be positive, got {self.range_}")

    def _evaluate(self, h):
        return self.sill * matern_correlation(h, self.shape, self.range_)


@dataclass(frozen=True)
class Nugget(CovarianceModel):
    """On-site variance term: C(h) = variance * [h == 0]."""

    variance: float

    def __post_init__(self):
        if self.variance < 0:
            raise ValueError(f"nugget variance must be nonnegative, got {self.variance}")

    @property
    def sill(self):
        return self.variance

    def _evaluate(self, h):
        return np.where(h == 0.0, self.variance, 0.0)


@dataclass(frozen=True)
class Sum(CovarianceModel):
    """Sum of covariance models (typically structure + nugget)."""

    parts: tuple

    def __post_init__(self):
        if not self.parts:
            raise ValueError("Sum needs at least one part")
        object.__setattr__(self, "parts", tuple(self.parts))

    @property
    def sill(self):
        return float(sum(p.sill for p in self.parts))

    def _evaluate(self, h):
        out = self.parts[0]._evaluate(h)
        for part in self.parts[1:]:
            out = out + part._evaluate(h)
        return out


def nugget_variance(model):
    """Total on-site (nugget) variance contributed by a model."""
    if isinstance(model, Nugget):
        return model.variance
    if isinstance(model, Sum):
        return float(sum(nugget_variance(p) for p in model.parts))
    return 0.0


def pure_nugget_variance(model):
    """Total variance if the model has no spatial structure at all, else None."""
    if isinstance(model, Nugget):
        return model.variance
    if isinstance(model, Sum):
        parts = [pure_nugget_variance(p) for p in model.parts]
        if all(v is not None for v in parts):
            return float(sum(parts))
    return None


def _min_eigval(mat):
    return float(np.linalg.eigvalsh(mat)[0])


@dataclass(frozen=True)
class LmcModel:
    """Linear model of coregionalization: C(h) = sum_k T_k rho_k(h).

    ``structures`` is a sequence of ``(T_k, rho_k)`` pairs where each T_k is
    a symmetric PSD p x p coefficient matrix and each rho_k a unit-sill
    covariance model.  Coefficient matrices are symmetrized exactly at
    construction so assembled joint covariances are exactly symmetric.
    """

    structures: tuple

    def __post_init__(self):
        if not self.structures:
            raise ValueError("LmcModel needs at least one structure")
        fixed = []
        p = None
        for k, (coef, corr) in enumerate(self.structures):
            coef = np.array(coef, dtype=float)
            if coef.ndim != 2 or coef.shape[0] != coef.shape[1]:
                raise ValueError(f"structure {k}: coefficient matrix must be square")
            if p is None:
                p = coef.shape[0]
            elif coef.shape[0] != p:
                raise ValueError("all coefficient matrices must share one dimension")
            if not np.allclose(coef, coef.T, atol=1e-8):
                raise ValueError(f"structure {k}: coefficient matrix is not symmetric")
            coef = (coef + coef.T) / 2.0
            if _min_eigval(coef) < PSD_TOL:
                raise ValueError(
                    f"structure {k}: coefficient matrix is not PSD "
                    f"(min eigenvalue {_min_eigval(coef):.3e})")
            if abs(corr.sill - 1.0) > 1e-8:
                raise ValueError(f"structure {k}: correlation model must have sill 1, got {corr.sill}")
            coef.setflags(write=False)
            fixed.append((coef, corr))
        object.__setattr__(self, "structures", tuple(fixed))

    @property
    def p(self):
        return self.structures[0][0].shape[0]

    def cross_covariance(self, h):
        """C(h) with shape (..., p, p) for distance array h of shape (...)."""
        arr = _check_distances(h)
        out = np.zeros(arr.shape + (self.p, self.p))
        for coef, corr in self.structures:
            out += corr._evaluate(arr)[..., None, None] * coef
        return out

    def has_nugget(self):
        return any(
            nugget_variance(corr) > 0 and np.any(np.diag(coef) > 0)
            for coef, corr in self.structures
        )


@dataclass(frozen=True)
class PmatModel:
    """Parsimonious multivariate Matern: shared range, averaged cross-shapes.

    Marginals are ``variances[i] * matern(h; shapes[i], range_)``.  The
    cross-covariance between variables i and j uses the averaged shape
    ``(shapes[i] + shapes[j]) / 2`` and the correlation coefficient

        rho_ij = beta_ij * G(v_i + d/2)^.5 G(v_j + d/2)^.5 G(v_ij)
                          / (G(v_i)^.5 G(v_j)^.5 G(v_ij + d/2)),

    where G is the gamma function and d the domain dimension.  ``beta`` must
    be symmetric PSD with unit diagonal for the model to be valid.
    """

    range_: float
    shapes: tuple
    variances: tuple
    beta: np.ndarray
    ndim: int = 2
    cross_corr: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        shapes = tuple(float(v) for v in self.shapes)
        variances = tuple(float(v) for v in self.variances)
        beta = np.array(self.beta, dtype=float)
        p = len(shapes)
        if self.range_ <= 0:
            raise ValueError(f"range must be positive, got {self.range_}")
        if any(v <= 0 for v in shapes):
            raise ValueError("all shape parameters must be positive")
        if any(v < 0 for v in variances) or len(variances) != p:
            raise ValueError("variances must be nonnegative and match shapes in length")
        if beta.shape != (p, p):
            raise ValueError(f"beta must be {p} x {p}")
        if not np.allclose(beta, beta.T, atol=1e-8):
            raise ValueError("beta must be symmetric")
        beta = (beta + beta.T) / 2.0
        if not np.allclose(np.diag(beta), 1.0, atol=1e-10):
            raise ValueError("beta must have unit diagonal")
        if _min_eigval(beta) < PSD_TOL:
            raise ValueError(f"beta is not PSD (min eigenvalue {_min_eigval(beta):.3e})")

        d = self.ndim
        cross = np.eye(p)
        for i in range(p):
            for j in range(i + 1, p):
                vi, vj = shapes[i], shapes[j]
                vij = 0.5 * (vi + vj)
                ratio = (np.sqrt(gamma_fn(vi + d / 2.0)) * np.sqrt(gamma_fn(vj + d / 2.0))
                         * gamma_fn(vij)
                         / (np.sqrt(gamma_fn(vi)) * np.sqrt(gamma_fn(vj))
                            * gamma_fn(vij + d / 2.0)))
                cross[i, j] = cross[j, i] = beta[i, j] * ratio
        if np.any(np.abs(cross) > 1.0 + 1e-12):
            raise ValueError("derived cross-correlations exceed 1 in magnitude")
        beta.setflags(write=False)
        cross.setflags(write=False)
        object.__setattr__(self, "shapes", shapes)
        object.__setattr__(self, "variances", variances)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "cross_corr", cross)

    @property
    def p(self):
        return len(self.shapes)

    def cross_covariance(self, h):
        """C(h) with shape (..., p, p) for distance array h of shape (...)."""
        arr = _check_distances(h)
        p = self.p
        sigma = np.sqrt(self.variances)
        out = np.empty(arr.shape + (p, p))
        for i in range(p):
            out[..., i, i] = self.variances[i] * matern_correlation(arr, self.shapes[i], self.range_)
            for j in range(i + 1, p):
                vij = 0.5 * (self.shapes[i] + self.shapes[j])
                block = (self.cross_corr[i, j] * sigma[i] * sigma[j]
                         * matern_correlation(arr, vij, self.range_))
                out[..., i, j] = block
                out[..., j, i] = block
        return out

    def has_nugget(self):
        return False


def lmc_cross_covariance(model, h):
    """Cross-covariance matrix of an LMC at distance h."""
    return model.cross_covariance(h)


def pmat_cross_covariance(model, h):
    """Cross-covariance matrix of a parsimonious multivariate Matern at distance h."""
    return model.cross_covariance(h)


def build_joint_covariance(model, locs, max_size=DENSE_CAP):
    """Dense covariance of the stacked field over all sites, site-major order.

    Index ``i * p + a`` refers to variable ``a`` at site ``i``.  The block
    for sites (i, j) is ``model.cross_covariance(dist[i, j])`` (or the scalar
    covariance for a univariate model).  The result is constructed exactly
    symmetric, not symmetrized afterwards.

    Raises
    ------
    SizeCapError
        If ``n * p`` exceeds ``max_size`` (keeps dense memory bounded).
    """
    p = 1 if isinstance(model, CovarianceModel) else model.p
    total = locs.n * p
    if total > max_size:
        raise SizeCapError(
            f"joint covariance would have {total} rows which exceeds the dense cap "
            f"of {max_size}; reduce the site count or raise max_size")
    dist = locs.dist
    if isinstance(model, CovarianceModel):
        return model.evaluate(dist)
    blocks = model.cross_covariance(dist)  # (n, n, p, p)
    return np.ascontiguousarray(blocks.transpose(0, 2, 1, 3).reshape(total, total))
