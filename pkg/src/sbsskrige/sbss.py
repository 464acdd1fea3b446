"""Spatial blind source separation.

The estimator whitens the data, computes one kernel-weighted local
covariance matrix per spatial kernel, and jointly diagonalizes them with
cyclic Givens-rotation sweeps.  The unmixing matrix is the diagonalizer
applied on top of the whitener; its row order and signs follow a fixed
convention so results are reproducible:

* rows sorted by decreasing sum of squared local-covariance diagonal
  entries of the matching latent component;
* each row flipped so its largest-magnitude entry is positive.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import MultiField, sample_covariance, whiten
from .errors import ConvergenceWarning, NotCentredError

CENTRED_TOL = 1e-8


@dataclass(frozen=True)
class SpatialKernel:
    """Isotropic pair weight f(h) used by the local covariance estimator."""

    def weight(self, h):
        raise NotImplementedError


@dataclass(frozen=True)
class Ball(SpatialKernel):
    """f(h) = 1 for h <= radius (includes the on-site h = 0 pairs)."""

    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError(f"ball radius must be positive, got {self.radius}")

    def weight(self, h):
        return (np.asarray(h, dtype=float) <= self.radius).astype(float)


@dataclass(frozen=True)
class Ring(SpatialKernel):
    """f(h) = 1 for inner < h <= outer (strict lower bound, excludes h = 0)."""

    inner: float
    outer: float

    def __post_init__(self):
        if not 0 <= self.inner < self.outer:
            raise ValueError(f"need 0 <= inner < outer, got ({self.inner}, {self.outer})")

    def weight(self, h):
        arr = np.asarray(h, dtype=float)
        return ((arr > self.inner) & (arr <= self.outer)).astype(float)


@dataclass(frozen=True)
class Gauss(SpatialKernel):
    """f(h) = exp(-h^2 / (2 bandwidth^2)); our parametrization, documented."""

    bandwidth: float

    def __post_init__(self):
        if self.bandwidth <= 0:
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")

    def weight(self, h):
        arr = np.asarray(h, dtype=float)
        return np.exp(-(arr**2) / (2.0 * self.bandwidth**2))


def kernel_weight(kernel, h):
    """Kernel weight at nonnegative distance(s) h."""
    return kernel.weight(h)


@dataclass(frozen=True)
class SbssFit:
    """Estimated unmixing matrix, sample mean, and latent field.

    ``diag_scores`` holds, per local covariance matrix, the fraction of its
    squared Frobenius mass sitting on the diagonal after rotation (1 means
    exactly diagonalized; a matrix that is identically zero scores 1).
    """

    unmixing: np.ndarray
    mean: np.ndarray
    latent: MultiField
    diag_scores: np.ndarray
    kernels: tuple

    def __post_init__(self):
        p = self.unmixing.shape[0]
        cov = sample_covariance(self.latent)
        if not np.allclose(cov, np.eye(p), atol=1e-6):
            raise AssertionError("latent sample covariance deviates from identity")


def local_covariance(field, kernel):
    """Kernel-weighted local covariance (1/n) sum_ij f(s_i - s_j) x_i x_j^T.

    The double sum runs over all ordered pairs including i = j whenever the
    kernel admits h = 0.  The result is symmetrized, since for symmetric
    kernels the estimator is symmetric only up to floating-point order.

    The field must be centred by the caller (mean within ``CENTRED_TOL``).
    """
    mean = field.values.mean(axis=0)
    if np.max(np.abs(mean)) > CENTRED_TOL:
        raise NotCentredError(
            f"local covariance requires a centred field; sample mean reaches "
            f"{np.max(np.abs(mean)):.3e}")
    weights = kernel.weight(field.locations.dist)
    m = field.values.T @ (weights @ field.values) / field.n
    return (m + m.T) / 2.0


def _joint_objective(mats):
    return float(sum(np.sum(np.diag(m) ** 2) for m in mats))


def joint_diagonalize(mats, tol=1e-8, max_sweeps=100):
    """Orthogonal U maximizing the summed squared diagonals of K matrices.

    Cyclic sweeps over index pairs apply, for each pair, the closed-form
    Givens rotation that is jointly optimal across all K matrices.  Sweeps
    stop once every rotation angle in a full sweep is below ``tol``; the
    objective is verified to be nondecreasing after every sweep.

    Emits :class:`ConvergenceWarning` (carrying the final angle) if
    ``max_sweeps`` is reached without convergence.
    """
    a = np.array(mats, dtype=float)
    if a.ndim != 3 or a.shape[1] != a.shape[2]:
        raise ValueError("expected a sequence of square matrices of equal size")
    if a.shape[0] < 1:
        raise ValueError("need at least one matrix")
    for k in range(a.shape[0]):
        if not np.allclose(a[k], a[k].transpose(), atol=1e-8):
            raise ValueError(f"matrix {k} is not symmetric within 1e-8")
    p = a.shape[1]
    u = np.eye(p)
    if p == 1:
        return u

    objective = _joint_objective(a)
    last_max_angle = np.inf
    for _ in range(max_sweeps):
        max_angle = 0.0
        for i in range(p - 1):
            for j in range(i + 1, p):
                d = a[:, i, i] - a[:, j, j]
                o = a[:, i, j] + a[:, j, i]
                ton = d @ d - o @ o
                toff = 2.0 * (d @ o)
                theta = 0.5 * np.arctan2(toff, ton + np.hypot(ton, toff))
                max_angle = max(max_angle, abs(theta))
                if abs(theta) <= tol:
                    continue
                c, s = np.cos(theta), np.sin(theta)
                # rotate columns then rows of every matrix, and the basis
                col_i = a[:, :, i].copy()
                col_j = a[:, :, j].copy()
                a[:, :, i] = c * col_i + s * col_j
                a[:, :, j] = -s * col_i + c * col_j
                row_i = a[:, i, :].copy()
                row_j = a[:, j, :].copy()
                a[:, i, :] = c * row_i + s * row_j
                a[:, j, :] = -s * row_i + c * row_j
                u_i = u[:, i].copy()
                u[:, i] = c * u_i + s * u[:, j]
                u[:, j] = -s * u_i + c * u[:, j]
        new_objective = _joint_objective(a)
        if new_objective < objective - 1e-9 * max(1.0, abs(objective)):
            raise RuntimeError(
                f"joint diagonalization objective decreased from {objective!r} to "
                f"{new_objective!r}; this indicates a numerical fault")
        objective = new_objective
        last_max_angle = max_angle
        if max_angle < tol:
            break
    else:
        warnings.warn(
            ConvergenceWarning(
                f"joint diagonalization stopped after {max_sweeps} sweeps with "
                f"largest rotation angle {last_max_angle:.3e}",
                final_angle=last_max_angle,
            ),
            stacklevel=2,
        )
    return u


def fit_sbss(field, kernels, tol=1e-8, max_sweeps=100):
    """Three-step unmixing estimate: whiten, localize, jointly diagonalize.

    Returns an :class:`SbssFit` whose ``latent`` field is the unmixed,
    exactly unit-covariance version of the input and whose ``unmixing`` row
    order and signs follow the module convention.
    """
    kernels = tuple(kernels)
    if not kernels:
        raise ValueError("need at least one spatial kernel")
    white = whiten(field)
    mats = [local_covariance(white.field, k) for k in kernels]
    u = joint_diagonalize(mats, tol=tol, max_sweeps=max_sweeps)

    rotated_diags = np.array([np.diag(u.T @ m @ u) for m in mats])  # (K, p)
    energy = np.sum(rotated_diags**2, axis=0)
    order = np.argsort(-energy, kind="stable")
    unmixing = (u.T @ white.whitener)[order]
    for row in unmixing:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0

    total_mass = np.array([np.sum(m**2) for m in mats])
    diag_mass = np.sum(rotated_diags**2, axis=1)
    scores = np.where(total_mass > 0, diag_mass / np.where(total_mass > 0, total_mass, 1.0), 1.0)

    latent = (field.values - white.mean) @ unmixing.T
    unmixing.setflags(write=False)
    scores.setflags(write=False)
    return SbssFit(
        unmixing=unmixing,
        mean=white.mean,
        latent=MultiField(field.locations, latent),
        diag_scores=scores,
        kernels=kernels,
    )


def predict_mix(fit, latent_predictions):
    """Map latent predictions back to the observation coordinates.

    Applies the inverse unmixing and re-adds the sample mean; with the
    training latents this reproduces the original field.
    """
    z = np.asarray(latent_predictions, dtype=float)
    squeeze = z.ndim == 1
    z = np.atleast_2d(z)
    x = np.linalg.solve(fit.unmixing, z.T).T + fit.mean
    return x[0] if squeeze else x


def md_index(gain):
    """Minimum-distance index of a gain matrix, in [0, 1].

    Measures how far the column-normalized gain is from the set of signed
    permutation matrices: 0 iff the gain is a signed permutation times a
    nonsingular diagonal, values near 1 for maximal mixing.  The best
    permutation is found by linear sum assignment on the squared normalized
    entries.
    """
    g = np.asarray(gain, dtype=float)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ValueError("gain must be a square matrix")
    if not np.all(np.isfinite(g)):
        raise ValueError("gain must be finite")
    p = g.shape[0]
    if p == 1:
        return 0.0
    norms = np.sqrt(np.sum(g**2, axis=0))
    safe = np.where(norms > 0, norms, 1.0)
    sq = (g / safe) ** 2
    rows, cols = linear_sum_assignment(-sq)
    score = sq[rows, cols].sum()
    return float(np.sqrt(max(p - score, 0.0) / (p - 1)))
