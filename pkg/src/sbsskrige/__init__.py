"""Multivariate spatial prediction via blind source separation and kriging.

The package bundles the whole pipeline: location/field containers, a small
family of covariance models (spherical, Matern, nugget, LMC, parsimonious
multivariate Matern), Gaussian and Student-t random-field simulation,
spatial blind source separation, variogram estimation and fitting, ordinary
kriging and cokriging, pivot ilr coordinates for compositional inputs, and
a reproducible benchmark harness with a CLI.
"""

__version__ = "0.1.0"

from .core import (LocationSet, MultiField, WhitenedField, concat_locations,
                   pairwise_distances, sample_covariance, whiten)
from .errors import (ConvergenceWarning, DegenerateSampleError,
                     EmptyVariogramError, NotCentredError,
                     NotPositiveDefiniteError, SbssKrigeError,
                     SingularCovarianceError, SingularSystemError,
                     SizeCapError, VariogramFitError)
from .models import (CovarianceModel, LmcModel, Matern, Nugget, PmatModel,
                     Spherical, Sum, build_joint_covariance,
                     lmc_cross_covariance, matern_correlation,
                     pmat_cross_covariance, spherical_correlation)
from .simulate import (CoordinateSampler, SbssSpec, SimulatedField, make_grid,
                       sample_coordinates, simulate_gaussian, simulate_joint,
                       simulate_sbss_setting)
from .sbss import (Ball, Gauss, Ring, SbssFit, SpatialKernel, fit_sbss,
                   joint_diagonalize, kernel_weight, local_covariance,
                   md_index, predict_mix)
from .variogram import (EmpiricalVariogram, FittedModel, empirical_variogram,
                        fit_lmc, fit_wls, project_psd)
from .kriging import (CokrigingSystem, KrigingSystem, cok_build, cok_predict,
                      component_mse, mse, ok_build, ok_predict, sbss_krige)
from .ilr import contrast_matrix, ilr_forward, ilr_inverse
from .bench import (BenchResult, ExperimentConfig, run_bench, run_replicate,
                    summarize)
from .streams import child_seed, substream

__all__ = [name for name in dir() if not name.startswith("_")]
