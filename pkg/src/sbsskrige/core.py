"""Locations, multivariate samples, sample moments, and whitening.

Conventions fixed here and relied on everywhere else:

* the sample covariance uses divisor ``n`` (not ``n - 1``), matching the
  ``1/n`` normalization of the local covariance estimator in :mod:`.sbss`;
* matrix inverse square roots are computed by symmetric eigendecomposition
  with eigenvalues clamped at ``1e-12`` before inversion, which keeps the
  whitener symmetric and deterministic.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .errors import DegenerateSampleError, SingularCovarianceError

EIG_CLAMP = 1e-12


class LocationSet:
    """n sites in R^d with a lazily computed pairwise-distance matrix.

    Coordinates are copied and frozen at construction.  The Euclidean
    distance matrix is computed on first access of :attr:`dist` and cached;
    the cache is immutable afterwards, so instances are safe to share across
    threads for concurrent reads.
    """

    def __init__(self, coords):
        coords = np.array(coords, dtype=float)
        if coords.ndim == 1:
            coords = coords[:, None]
        if coords.ndim != 2:
            raise ValueError("coords must be a 2-d array of shape (n, d)")
        n, d = coords.shape
        if n < 1 or d < 1:
            raise ValueError(f"need n >= 1 sites and d >= 1 coordinates, got shape ({n}, {d})")
        if not np.all(np.isfinite(coords)):
            raise ValueError("all coordinates must be finite")
        coords.setflags(write=False)
        self.coords = coords
        self._dist = None

    @property
    def n(self):
        return self.coords.shape[0]

    @property
    def ndim(self):
        return self.coords.shape[1]

    @property
    def dist(self):
        """Symmetric n x n Euclidean distance matrix with zero diagonal."""
        if self._dist is None:
            d = squareform(pdist(self.coords)) if self.n > 1 else np.zeros((1, 1))
            d.setflags(write=False)
            self._dist = d
        return self._dist

    def __len__(self):
        return self.n

    def __repr__(self):
        return f"LocationSet(n={self.n}, d={self.ndim})"


def concat_locations(first, second):
    """Stack two location sets into one (used for joint train/test simulation)."""
    return LocationSet(np.vstack([first.coords, second.coords]))


class MultiField:
    """p-variate observations attached to a :class:`LocationSet`.

    Row i of ``values`` holds the p observed values at site i.  Values are
    copied and frozen at construction.
    """

    def __init__(self, locations, values):
        values = np.array(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2:
            raise ValueError("values must have shape (n, p)")
        if values.shape[0] != locations.n:
            raise ValueError(
                f"values has {values.shape[0]} rows but locations has {locations.n} sites")
        if values.shape[1] < 1:
            raise ValueError("need p >= 1 value columns")
        if not np.all(np.isfinite(values)):
            raise ValueError("all values must be finite")
        values.setflags(write=False)
        self.locations = locations
        self.values = values

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def p(self):
        return self.values.shape[1]

    def __repr__(self):
        return f"MultiField(n={self.n}, p={self.p})"


@dataclass(frozen=True)
class WhitenedField:
    """Whitened sample plus the affine pieces needed to undo the whitening.

    ``whitener`` is the symmetric inverse square root of the sample
    covariance, ``dewhitener`` its inverse; ``field`` holds the whitened
    values whose sample covariance is the identity to 1e-8.
    """

    field: MultiField
    mean: np.ndarray
    whitener: np.ndarray
    dewhitener: np.ndarray

    def dewhiten(self, values):
        """Map whitened rows back to the original coordinates."""
        return np.asarray(values, dtype=float) @ self.dewhitener + self.mean


def pairwise_distances(locs):
    """Euclidean distance matrix of a location set (cached on the instance)."""
    return locs.dist


def sample_covariance(field):
    """Sample covariance of a field with divisor n (not n - 1).

    The 1/n convention matches the local covariance estimator used by the
    blind source separation routines, so that a kernel admitting only the
    i = j pairs reproduces this matrix exactly.

    Raises
    ------
    DegenerateSampleError
        If the field has fewer than two sites.
    """
    if field.n < 2:
        raise DegenerateSampleError(f"need at least 2 sites to estimate a covariance, got {field.n}")
    centred = field.values - field.values.mean(axis=0)
    cov = centred.T @ centred / field.n
    return (cov + cov.T) / 2.0


def whiten(field):
    """Centre and whiten a field so its sample covariance is the identity.

    The whitener is the symmetric inverse square root of the sample
    covariance, obtained from an eigendecomposition with eigenvalues clamped
    at ``EIG_CLAMP`` before inversion.

    Raises
    ------
    SingularCovarianceError
        If the sample covariance is not positive definite within the clamp,
        naming the offending eigenvalue.
    """
    cov = sample_covariance(field)
    eigvals, eigvecs = np.linalg.eigh(cov)
    if eigvals[0] < EIG_CLAMP:
        raise SingularCovarianceError(
            f"sample covariance is not positive definite: smallest eigenvalue {eigvals[0]:.3e} "
            f"is below {EIG_CLAMP:.0e}")
    clamped = np.maximum(eigvals, EIG_CLAMP)
    whitener = (eigvecs * (1.0 / np.sqrt(clamped))) @ eigvecs.T
    dewhitener = (eigvecs * np.sqrt(clamped)) @ eigvecs.T
    mean = field.values.mean(axis=0)
    whitened = (field.values - mean) @ whitener
    return WhitenedField(
        field=MultiField(field.locations, whitened),
        mean=mean,
        whitener=whitener,
        dewhitener=dewhitener,
    )
