"""Reproducible coordinate sampling and random-field simulation.

Gaussian fields are drawn by Cholesky factorization of the dense joint
covariance over all requested sites, with a small diagonal jitter escalated
on factorization failure.  Train and test sites are always simulated in one
realization (a single factorization over their union).

Every draw is keyed by ``(seed, stream path)`` through :mod:`.streams`, so a
replicate is reproducible bit for bit no matter how many others run next to
it.  Draw order inside one stream is fixed and documented per sampler.
"""

from dataclasses import dataclass

import numpy as np

from .core import LocationSet, MultiField, concat_locations
from .errors import NotPositiveDefiniteError, SizeCapError
from .models import (CovarianceModel, DENSE_CAP, build_joint_covariance,
                     pure_nugget_variance)
from .streams import STREAM_COORDS, STREAM_FIELD, STREAM_MIXING, substream

_JITTERS = (0.0, 1e-10, 1e-9, 1e-8, 1e-7)

UNIFORM = "uniform"
SKEW = "skew"
GAUSSIAN = "gaussian"
STUDENT_T = "student_t"


@dataclass(frozen=True)
class CoordinateSampler:
    """Random site sampler on the square [0, scale]^2.

    ``uniform`` draws both coordinates from U(0, 1) * scale; ``skew`` draws
    x from Beta(2, 5) * scale (mass pushed to the left edge) and y uniformly.
    """

    variant: str
    scale: float = 35.0
    count: int = 1225

    def __post_init__(self):
        if self.variant not in (UNIFORM, SKEW):
            raise ValueError(f"unknown sampler variant {self.variant!r}")
        if self.scale <= 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        if self.count < 1:
            raise ValueError(f"count must be >= 1, got {self.count}")


@dataclass(frozen=True)
class SbssSpec:
    """Latent-model description X(s) = mixing * Z(s) + mean.

    ``latent_models`` are p unit-sill covariance models, one per independent
    latent component.  ``marginal`` selects Gaussian components or the
    Student-t construction with ``dof`` degrees of freedom (rescaled to unit
    variance).
    """

    latent_models: tuple
    mixing: np.ndarray
    mean: np.ndarray
    marginal: str = GAUSSIAN
    dof: int = 5

    def __post_init__(self):
        models = tuple(self.latent_models)
        p = len(models)
        if p < 1:
            raise ValueError("need at least one latent model")
        for i, m in enumerate(models):
            if abs(m.sill - 1.0) > 1e-8:
                raise ValueError(f"latent model {i} must have sill 1, got {m.sill}")
        mixing = np.array(self.mixing, dtype=float)
        if mixing.shape != (p, p):
            raise ValueError(f"mixing must be {p} x {p}, got {mixing.shape}")
        if not np.isfinite(np.linalg.cond(mixing)):
            raise ValueError("mixing matrix must be invertible")
        mean = np.array(self.mean, dtype=float).reshape(-1)
        if mean.shape != (p,):
            raise ValueError(f"mean must have length {p}")
        if self.marginal not in (GAUSSIAN, STUDENT_T):
            raise ValueError(f"unknown marginal {self.marginal!r}")
        if self.marginal == STUDENT_T and self.dof <= 2:
            raise ValueError("Student-t construction needs dof > 2 for a finite variance")
        mixing.setflags(write=False)
        mean.setflags(write=False)
        object.__setattr__(self, "latent_models", models)
        object.__setattr__(self, "mixing", mixing)
        object.__setattr__(self, "mean", mean)

    @property
    def p(self):
        return len(self.latent_models)


@dataclass(frozen=True)
class SimulatedField:
    """One realization split into training sites and a prediction grid."""

    train: MultiField
    test: MultiField
    seed: int


def sample_coordinates(sampler, seed):
    """Draw a LocationSet from a CoordinateSampler; deterministic given seed.

    Draw order within the stream: uniform variant consumes one (count, 2)
    uniform block; skew variant consumes a (count, 7) uniform block for the
    Beta(2, 5) x-coordinates (gamma variates as sums of exponentials, exact
    and loop-free for integer shapes) followed by one (count,) block for y.
    """
    rng = substream(seed, STREAM_COORDS)
    n = sampler.count
    if sampler.variant == UNIFORM:
        coords = rng.random((n, 2)) * sampler.scale
    else:
        u = rng.random((n, 7))
        g2 = -np.log1p(-u[:, :2]).sum(axis=1)
        g5 = -np.log1p(-u[:, 2:]).sum(axis=1)
        x = g2 / (g2 + g5) * sampler.scale
        y = rng.random(n) * sampler.scale
        coords = np.column_stack([x, y])
    return LocationSet(coords)


def make_grid(side, offset=0.5):
    """Regular side x side grid {(x + offset, y + offset)}, x-major order."""
    if side < 1:
        raise ValueError(f"side must be >= 1, got {side}")
    xs, ys = np.meshgrid(np.arange(side, dtype=float), np.arange(side, dtype=float),
                         indexing="ij")
    coords = np.column_stack([xs.ravel(), ys.ravel()]) + float(offset)
    return LocationSet(coords)


class _FieldFactor:
    """Cholesky factor of a joint covariance, reusable across draws.

    Pure-nugget models skip the dense assembly: the factor of a diagonal
    covariance is applied directly.
    """

    def __init__(self, model, locs, max_size=DENSE_CAP):
        self.p = 1 if isinstance(model, CovarianceModel) else model.p
        self.total = locs.n * self.p
        nug = pure_nugget_variance(model) if isinstance(model, CovarianceModel) else None
        if nug is not None:
            if self.total > max_size:
                raise SizeCapError(
                    f"joint covariance would have {self.total} rows which exceeds the "
                    f"dense cap of {max_size}")
            self._scale = np.sqrt(nug)
            self._chol = None
            return
        self._scale = None
        cov = build_joint_covariance(model, locs, max_size=max_size)
        self._chol = _cholesky_with_jitter(cov)

    def draw(self, rng):
        """One zero-mean draw, shape (n, p), site-major."""
        z = rng.standard_normal(self.total)
        if self._chol is None:
            x = self._scale * z
        else:
            x = self._chol @ z
        return x.reshape(-1, self.p)


def _cholesky_with_jitter(cov):
    n = cov.shape[0]
    for i, jitter in enumerate(_JITTERS):
        try:
            if jitter == 0.0:
                return np.linalg.cholesky(cov)
            return np.linalg.cholesky(cov + jitter * np.eye(n))
        except np.linalg.LinAlgError:
            if i == len(_JITTERS) - 1:
                raise NotPositiveDefiniteError(
                    f"covariance is not positive definite even with diagonal jitter "
                    f"{jitter:.0e}") from None
    raise AssertionError("unreachable")


def simulate_gaussian(model, locs, seed):
    """Zero-mean Gaussian field with the model's covariance; deterministic.

    ``model`` may be univariate (p = 1) or a matrix-valued LMC / PMat model.
    """
    factor = _FieldFactor(model, locs)
    rng = substream(seed, STREAM_FIELD, 0, 0)
    return MultiField(locs, factor.draw(rng))


def _draw_latent(spec, locs, seed):
    """Latent matrix Z, shape (n, p): independent columns, unit variance."""
    n = locs.n
    cols = np.empty((n, spec.p))
    for c, model in enumerate(spec.latent_models):
        factor = _FieldFactor(model, locs)
        if spec.marginal == GAUSSIAN:
            cols[:, c] = factor.draw(substream(seed, STREAM_FIELD, c, 0))[:, 0]
        else:
            # Student-t with k = dof: numerator field over the square root of
            # a chi-square built from k further fields, scaled to variance 1.
            k = spec.dof
            num = factor.draw(substream(seed, STREAM_FIELD, c, 0))[:, 0]
            denom = np.zeros(n)
            for copy in range(1, k + 1):
                extra = factor.draw(substream(seed, STREAM_FIELD, c, copy))[:, 0]
                denom += extra**2
            cols[:, c] = num * np.sqrt(k - 2.0) / np.sqrt(denom)
    return cols


def simulate_sbss_setting(spec, locs, seed):
    """Simulate X = mixing * Z + mean from an SbssSpec; deterministic given seed."""
    latent = _draw_latent(spec, locs, seed)
    values = latent @ spec.mixing.T + spec.mean
    return MultiField(locs, values)


def simulate_joint(model, train_locs, test_locs, seed):
    """Simulate one realization on the union of train and test sites.

    ``model`` may be an SbssSpec or any covariance model accepted by
    :func:`simulate_gaussian`.  The union is factorized once, so the split
    halves come from the same realization.
    """
    union = concat_locations(train_locs, test_locs)
    if isinstance(model, SbssSpec):
        joint = simulate_sbss_setting(model, union, seed)
    else:
        joint = simulate_gaussian(model, union, seed)
    n_train = train_locs.n
    return SimulatedField(
        train=MultiField(train_locs, joint.values[:n_train]),
        test=MultiField(test_locs, joint.values[n_train:]),
        seed=int(seed),
    )


def random_mixing(p, seed):
    """Mixing matrix with independent standard normal entries."""
    return substream(seed, STREAM_MIXING).standard_normal((p, p))
