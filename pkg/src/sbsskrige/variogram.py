"""Empirical semivariograms and covariance-model fitting.

Univariate models are fitted by Cressie-weighted least squares on the
binned empirical variogram using a deterministic multi-start Nelder-Mead
search; the linear model of coregionalization is fitted structure-wise by
pairwise linear least squares followed by projection of each coefficient
matrix onto the PSD cone.
"""

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import DegenerateSampleError, EmptyVariogramError, VariogramFitError
from .models import CovarianceModel, LmcModel, Matern, Nugget, Spherical, Sum

DEFAULT_BINS = 15
CRESSIE_EPS = 1e-6

SPHERICAL = "spherical"
MATERN = "matern"
FAMILIES = (SPHERICAL, MATERN)

# parameter layout per family; shape is the Matern smoothness
_PARAM_NAMES = {
    SPHERICAL: ("sill", "range", "nugget"),
    MATERN: ("sill", "shape", "range", "nugget"),
}


@dataclass(frozen=True)
class EmpiricalVariogram:
    """Binned semivariance estimate; ``gamma`` is NaN where a bin is empty."""

    bin_centers: np.ndarray
    gamma: np.ndarray
    counts: np.ndarray
    max_dist: float

    def nonempty(self):
        """(centers, gamma, counts) restricted to bins with at least one pair."""
        mask = self.counts > 0
        return self.bin_centers[mask], self.gamma[mask], self.counts[mask]


@dataclass(frozen=True)
class FittedModel:
    """Fitted covariance model (structure + nugget) with its WLS objective."""

    model: CovarianceModel
    objective_value: float
    converged: bool


def empirical_variogram(values, locs, bins=DEFAULT_BINS, max_dist=None):
    """Matheron estimator on equal-width distance bins over (0, max_dist].

    ``values`` is either one vector (direct variogram) or a pair of vectors
    (cross-variogram); per bin the estimate is the mean of
    (v_i - v_j)(w_i - w_j) over unordered site pairs, halved.  ``max_dist``
    defaults to a third of the maximum pairwise distance.

    Raises
    ------
    EmptyVariogramError
        If no bin receives a single pair.
    """
    if isinstance(values, tuple):
        v, w = (np.asarray(x, dtype=float).reshape(-1) for x in values)
    else:
        v = np.asarray(values, dtype=float).reshape(-1)
        w = v
    n = locs.n
    if v.shape[0] != n or w.shape[0] != n:
        raise ValueError("value vectors must have one entry per site")
    if n < 2:
        raise DegenerateSampleError("need at least 2 sites for a variogram")

    iu = np.triu_indices(n, k=1)
    d = locs.dist[iu]
    if max_dist is None:
        max_dist = float(d.max()) / 3.0
    if max_dist <= 0:
        raise ValueError("max_dist must be positive")
    bins = int(bins)
    if bins < 1:
        raise ValueError("need at least one bin")

    width = max_dist / bins
    idx = np.ceil(d / width).astype(int) - 1  # bins are (0, w], (w, 2w], ...
    keep = (idx >= 0) & (idx < bins)
    counts = np.bincount(idx[keep], minlength=bins)
    if counts.sum() == 0:
        raise EmptyVariogramError(
            f"no site pair falls inside (0, {max_dist:g}]; widen max_dist")
    prod = (v[iu[0]] - v[iu[1]]) * (w[iu[0]] - w[iu[1]])
    sums = np.bincount(idx[keep], weights=prod[keep], minlength=bins)
    with np.errstate(invalid="ignore"):
        gamma = np.where(counts > 0, sums / np.maximum(2 * counts, 1), np.nan)
    centers = (np.arange(bins) + 0.5) * width
    return EmpiricalVariogram(bin_centers=centers, gamma=gamma,
                              counts=counts.astype(float), max_dist=float(max_dist))


def _model_from_params(family, params):
    if family == SPHERICAL:
        sill, range_, nugget = params
        structure = Spherical(max(sill, 0.0), max(range_, 1e-12))
    else:
        sill, shape, range_, nugget = params
        structure = Matern(max(sill, 0.0), min(max(shape, 1e-6), 50.0), max(range_, 1e-12))
    return Sum((structure, Nugget(max(nugget, 0.0))))


def _model_gamma(family, params, h):
    """Semivariogram of the parametric model at strictly positive lags."""
    model = _model_from_params(family, params)
    return model.sill - model.evaluate(h)


def default_bounds(family, emp):
    """Bounds used by :func:`fit_wls` when none are given."""
    _, g, _ = emp.nonempty()
    gmax = max(float(np.max(g)), 1e-12) if g.size else 1.0
    bounds = {
        "sill": (0.0, 5.0 * gmax),
        "range": (1e-3 * emp.max_dist, 3.0 * emp.max_dist),
        "nugget": (0.0, 2.0 * gmax),
    }
    if family == MATERN:
        bounds["shape"] = (0.1, 3.0)  # identifiability at desk-scale n
    return bounds


def fit_starts(family, bounds):
    """Eight deterministic start points spanning the bounds."""
    corners = list(itertools.product((0.3, 0.9), (0.1, 0.45), (0.05, 0.4)))
    names = _PARAM_NAMES[family]
    starts = []
    for i, (fs, fr, fn) in enumerate(corners):
        fracs = {"sill": fs, "range": fr, "nugget": fn}
        if family == MATERN:
            fracs["shape"] = 0.2 if i % 2 == 0 else 0.6
        starts.append(np.array([
            bounds[n][0] + fracs[n] * (bounds[n][1] - bounds[n][0]) for n in names
        ]))
    return starts


def fit_wls(emp, family=SPHERICAL, bounds=None):
    """Fit structure + nugget to an empirical variogram by weighted SSE.

    Minimizes ``sum_b counts_b (gamma_b - model_b)^2 / max(model_b, eps)^2``
    (Cressie weights) with bounded Nelder-Mead from eight deterministic
    starts, returning the best.

    Parameters
    ----------
    emp : EmpiricalVariogram
    family : "spherical" or "matern"
    bounds : optional dict with keys among sill / shape / range / nugget,
        each mapping to a (low, high) pair; unspecified keys get defaults.

    Raises
    ------
    VariogramFitError
        With fewer than three nonempty bins, or if the objective is
        non-finite at every start.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown model family {family!r}")
    h, g, c = emp.nonempty()
    if h.size < 3:
        raise VariogramFitError(
            f"need at least 3 nonempty bins to fit a variogram, got {h.size}")

    merged = default_bounds(family, emp)
    if bounds:
        merged.update(bounds)
    names = _PARAM_NAMES[family]
    box = [merged[n] for n in names]

    def objective(theta):
        mg = _model_gamma(family, theta, h)
        denom = np.maximum(mg, CRESSIE_EPS)
        return float(np.sum(c * (g - mg) ** 2 / denom**2))

    best = None
    for start in fit_starts(family, merged):
        f0 = objective(start)
        if not np.isfinite(f0):
            continue
        # termination on the simplex spread; fatol scaled to the objective
        res = minimize(objective, start, method="Nelder-Mead", bounds=box,
                       options={"xatol": 1e-6, "fatol": 1e-8 * (1.0 + abs(f0)),
                                "maxiter": 2000, "maxfev": 4000})
        if best is None or res.fun < best.fun:
            best = res
    if best is None or not np.isfinite(best.fun):
        raise VariogramFitError("objective non-finite at every start point")
    return FittedModel(model=_model_from_params(family, best.x),
                       objective_value=float(best.fun), converged=bool(best.success))


def project_psd(mat):
    """Nearest-PSD projection: eigendecompose and zero negative eigenvalues."""
    sym = (np.asarray(mat, dtype=float) + np.asarray(mat, dtype=float).T) / 2.0
    eigvals, eigvecs = np.linalg.eigh(sym)
    clipped = np.maximum(eigvals, 0.0)
    proj = (eigvecs * clipped) @ eigvecs.T
    return (proj + proj.T) / 2.0


def fit_lmc(field, structures, bins=DEFAULT_BINS, max_dist=None):
    """Fit coefficient matrices of an LMC with fixed correlation structures.

    For every variable pair (i, j), i <= j, the empirical (cross-)variogram
    is regressed linearly on the structures' unit-sill variograms; per-pair
    partial sills may come out negative and are kept until each assembled
    coefficient matrix is projected onto the PSD cone at the end.

    Raises
    ------
    VariogramFitError
        If fewer nonempty bins than structures are available for some pair.
    """
    structures = tuple(structures)
    if not structures:
        raise ValueError("need at least one structure")
    for k, s in enumerate(structures):
        if abs(s.sill - 1.0) > 1e-8:
            raise ValueError(f"structure {k} must have unit sill, got {s.sill}")
    p = field.p
    r = len(structures)
    sills = np.zeros((r, p, p))
    for i in range(p):
        for j in range(i, p):
            pair = (field.values[:, i], field.values[:, j])
            emp = empirical_variogram(pair, field.locations, bins=bins, max_dist=max_dist)
            h, g, _ = emp.nonempty()
            if h.size < r:
                raise VariogramFitError(
                    f"pair ({i}, {j}): {h.size} nonempty bins but {r} structures")
            design = np.column_stack([s.sill - s.evaluate(h) for s in structures])
            coef, *_ = np.linalg.lstsq(design, g, rcond=None)
            sills[:, i, j] = coef
            sills[:, j, i] = coef
    return LmcModel(tuple((project_psd(sills[k]), structures[k]) for k in range(r)))
