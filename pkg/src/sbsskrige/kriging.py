"""Ordinary kriging, ordinary cokriging under an LMC, and the composed
blind-source-separation kriging predictor.

All systems are global (every training site enters every prediction): at
desk scale one symmetric-indefinite factorization reused across right-hand
sides beats any neighbourhood search, and it is deterministic.  Saddle-point
systems are factorized once by Bunch-Kaufman (LAPACK ``sytrf``) and solved
for many targets with ``sytrs``; pivots below ``PIVOT_TOL`` flag a singular
system.
"""

import logging

import numpy as np
from scipy.linalg import lapack
from scipy.spatial.distance import cdist

from .core import LocationSet
from .errors import SingularSystemError, VariogramFitError, EmptyVariogramError
from .models import Nugget, build_joint_covariance, nugget_variance
from .sbss import fit_sbss, predict_mix
from .variogram import SPHERICAL, empirical_variogram, fit_wls

logger = logging.getLogger(__name__)

PIVOT_TOL = 1e-12


class _SymmetricFactor:
    """Bunch-Kaufman factorization of a symmetric indefinite matrix."""

    def __init__(self, mat):
        ldu, ipiv, info = lapack.dsytrf(mat, lower=1)
        if info > 0:
            raise SingularSystemError("system matrix is exactly singular")
        if info < 0:
            raise ValueError(f"illegal argument {-info} passed to sytrf")
        self._ldu = ldu
        self._ipiv = ipiv
        self._check_pivots()

    def _check_pivots(self):
        d = self._ldu
        ipiv = self._ipiv
        i = 0
        m = d.shape[0]
        while i < m:
            if ipiv[i] >= 0:
                if abs(d[i, i]) < PIVOT_TOL:
                    raise SingularSystemError(
                        f"pivot {i} has magnitude {abs(d[i, i]):.3e} < {PIVOT_TOL:.0e}")
                i += 1
            else:
                det = d[i, i] * d[i + 1, i + 1] - d[i + 1, i] ** 2
                if np.sqrt(abs(det)) < PIVOT_TOL:
                    raise SingularSystemError(
                        f"2x2 pivot block at {i} is singular within {PIVOT_TOL:.0e}")
                i += 2

    def solve(self, rhs):
        rhs = np.asarray(rhs, dtype=float)
        squeeze = rhs.ndim == 1
        b = rhs[:, None] if squeeze else rhs
        x, info = lapack.dsytrs(self._ldu, self._ipiv, b, lower=1)
        if info != 0:
            raise SingularSystemError("backsolve failed on a factorized system")
        return x[:, 0] if squeeze else x


def _nearest_pair(locs):
    d = locs.dist.copy()
    np.fill_diagonal(d, np.inf)
    i, j = np.unravel_index(np.argmin(d), d.shape)
    return int(i), int(j), float(d[i, j])


class KrigingSystem:
    """Factorized ordinary-kriging saddle-point system, reusable per target."""

    def __init__(self, factor, values, locs, model):
        self._factor = factor
        self.values = values
        self.locations = locs
        self.model = model

    @property
    def n(self):
        return self.values.shape[0]

    def weights(self, targets):
        """Kriging weights and Lagrange multipliers for each target site.

        Returns ``(lam, mult)`` with ``lam`` of shape (m, n) summing to one
        per row, and ``mult`` of shape (m,).
        """
        rhs = self._rhs(targets)
        sol = self._factor.solve(rhs)
        return sol[:-1].T, sol[-1]

    def _rhs(self, targets):
        c0 = self.model.evaluate(cdist(targets.coords, self.locations.coords))
        return np.vstack([c0.T, np.ones((1, targets.n))])


class CokrigingSystem:
    """Factorized ordinary-cokriging system with one constraint per variable."""

    def __init__(self, factor, field, model):
        self._factor = factor
        self.field = field
        self.model = model

    @property
    def n(self):
        return self.field.n

    @property
    def p(self):
        return self.field.p


def ok_build(values, locs, model):
    """Assemble and factorize the ordinary-kriging system once.

    The system is ``[[C, 1], [1^T, 0]]`` with ``C[i, j]`` the covariance at
    the cached pairwise distances.  Raises :class:`SingularSystemError`
    naming the nearest site pair when the factorization detects singularity
    (typically coincident sites without a nugget).
    """
    values = np.asarray(values, dtype=float).reshape(-1)
    if values.shape[0] != locs.n:
        raise ValueError("one value per site required")
    if model.sill <= 0:
        raise ValueError("model sill must be positive")
    if locs.n > 1 and nugget_variance(model) == 0.0:
        i, j, d = _nearest_pair(locs)
        if d == 0.0:
            raise SingularSystemError(
                f"sites {i} and {j} coincide and the model has no nugget")
    n = locs.n
    a = np.empty((n + 1, n + 1))
    a[:n, :n] = model.evaluate(locs.dist)
    a[:n, n] = 1.0
    a[n, :n] = 1.0
    a[n, n] = 0.0
    try:
        factor = _SymmetricFactor(a)
    except SingularSystemError as exc:
        i, j, d = _nearest_pair(locs) if n > 1 else (0, 0, np.inf)
        raise SingularSystemError(
            f"{exc}; nearest site pair is ({i}, {j}) at distance {d:.6g}") from None
    return KrigingSystem(factor, values, locs, model)


def ok_predict(system, targets, with_variances=True):
    """Predict at target sites from a factorized ordinary-kriging system.

    Returns ``(predictions, variances)``; ``variances`` is None when
    ``with_variances`` is false, in which case only a single solve against
    the observed values is needed (much cheaper for many targets).
    """
    rhs = system._rhs(targets)
    if not with_variances:
        dual = system._factor.solve(np.append(system.values, 0.0))
        return rhs.T @ dual, None
    sol = system._factor.solve(rhs)
    preds = sol[:-1].T @ system.values
    c0 = system.model.evaluate(0.0)
    variances = c0 - np.einsum("ij,ij->j", sol, rhs)
    return preds, variances


def cok_build(field, model):
    """Assemble and factorize the ordinary-cokriging system once.

    Site-major stacking: row ``i * p + a`` is variable ``a`` at site ``i``;
    the final p rows hold one unbiasedness constraint per variable.
    """
    p = field.p
    if model.p != p:
        raise ValueError(f"model is {model.p}-variate but the field has p = {p}")
    if field.locations.n > 1 and not model.has_nugget():
        i, j, d = _nearest_pair(field.locations)
        if d == 0.0:
            raise SingularSystemError(
                f"sites {i} and {j} coincide and the model has no nugget structure")
    c = build_joint_covariance(model, field.locations)
    np_total = c.shape[0]
    a = np.zeros((np_total + p, np_total + p))
    a[:np_total, :np_total] = c
    site_rows = np.arange(field.locations.n) * p
    for b in range(p):
        a[site_rows + b, np_total + b] = 1.0
        a[np_total + b, site_rows + b] = 1.0
    try:
        factor = _SymmetricFactor(a)
    except SingularSystemError as exc:
        i, j, d = _nearest_pair(field.locations) if field.locations.n > 1 else (0, 0, np.inf)
        raise SingularSystemError(
            f"{exc}; nearest site pair is ({i}, {j}) at distance {d:.6g}") from None
    return CokrigingSystem(factor, field, model)


def _cok_rhs(system, targets):
    """Right-hand-side matrix, one column per (target, predicted variable)."""
    n, p, m = system.n, system.p, targets.n
    blocks = system.model.cross_covariance(
        cdist(system.field.locations.coords, targets.coords))  # (n, m, p, p)
    top = blocks.transpose(0, 2, 1, 3).reshape(n * p, m * p)
    bottom = np.tile(np.eye(p), (1, m))
    return np.vstack([top, bottom])


def cok_predict(system, targets, with_variances=False):
    """Predict all variables at the target sites from one factorization.

    Returns ``(predictions, variances)`` with shapes (m, p); ``variances``
    is None unless requested (the dual solve used otherwise needs a single
    right-hand side regardless of the number of targets).
    """
    n, p = system.n, system.p
    rhs = _cok_rhs(system, targets)
    stacked = system.field.values.reshape(n * p)
    if not with_variances:
        dual = system._factor.solve(np.concatenate([stacked, np.zeros(p)]))
        preds = (rhs.T @ dual).reshape(targets.n, p)
        return preds, None
    sol = system._factor.solve(rhs)
    preds = (sol[: n * p].T @ stacked).reshape(targets.n, p)
    c0 = np.diag(system.model.cross_covariance(0.0))
    variances = (np.tile(c0, targets.n) - np.einsum("ij,ij->j", sol, rhs)).reshape(
        targets.n, p)
    return preds, variances


def sbss_krige(field, kernels, family=SPHERICAL, targets=None, bins=None,
               max_dist=None, bounds=None):
    """Blind-source-separation kriging: unmix, krige each latent, remix.

    Fits the unmixing on the training field, then for every latent component
    estimates an empirical variogram, fits ``family`` plus nugget by WLS, and
    kriges the component at the targets; the final step mixes the latent
    predictions back and re-adds the mean.  A component whose variogram fit
    fails (or yields an unusable model) falls back to a pure-nugget model
    with a logged warning so long benchmark runs always complete.
    """
    if targets is None:
        raise ValueError("targets are required")
    fit = fit_sbss(field, kernels)
    m = targets.n
    latent_preds = np.empty((m, field.p))
    vario_kwargs = {}
    if bins is not None:
        vario_kwargs["bins"] = bins
    for c in range(field.p):
        z = fit.latent.values[:, c]
        model = None
        try:
            emp = empirical_variogram(z, field.locations, max_dist=max_dist, **vario_kwargs)
            fitted = fit_wls(emp, family=family, bounds=bounds)
            if fitted.model.sill > 0:
                model = fitted.model
        except (EmptyVariogramError, VariogramFitError) as exc:
            logger.warning("component %d: variogram fit failed (%s); using pure nugget", c, exc)
        if model is None:
            model = Nugget(float(np.var(z)) or 1.0)
        try:
            system = ok_build(z, field.locations, model)
        except SingularSystemError as exc:
            logger.warning("component %d: singular system (%s); refitting with pure nugget",
                           c, exc)
            system = ok_build(z, field.locations, Nugget(float(np.var(z)) or 1.0))
        latent_preds[:, c], _ = ok_predict(system, targets, with_variances=False)
    return predict_mix(fit, latent_preds)


def mse(predicted, truth):
    """Mean squared prediction error, summed over variables per site.

    Per-site squared-error vectors are summed over the p variables and the
    total divided by the number of sites, so with p = 3 an all-ones error
    yields 3.0.  Use :func:`component_mse` for the per-variable breakdown.
    """
    a = np.asarray(predicted, dtype=float)
    b = np.asarray(truth, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    m = a.shape[0]
    return float(np.sum((a - b) ** 2) / m)


def component_mse(predicted, truth):
    """Per-variable mean squared error (mean over sites, one value per column)."""
    a = np.atleast_2d(np.asarray(predicted, dtype=float))
    b = np.atleast_2d(np.asarray(truth, dtype=float))
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return ((a - b) ** 2).mean(axis=0)
