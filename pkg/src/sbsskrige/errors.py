"""Exception and warning types shared across the package."""


class SbssKrigeError(Exception):
    """Base class for errors raised by this package."""


class DegenerateSampleError(SbssKrigeError):
    """Too few samples for the requested estimate."""


class SingularCovarianceError(SbssKrigeError):
    """Sample covariance is not positive definite within tolerance."""


class SizeCapError(SbssKrigeError):
    """A dense matrix would exceed the configured size cap."""


class NotPositiveDefiniteError(SbssKrigeError):
    """Covariance could not be factorized even after jitter escalation."""


class NotCentredError(SbssKrigeError):
    """Operation requires a centred field but the sample mean is nonzero."""


class EmptyVariogramError(SbssKrigeError):
    """No distance bin received any site pair."""


class VariogramFitError(SbssKrigeError):
    """Variogram model fitting failed."""


class SingularSystemError(SbssKrigeError):
    """Kriging system matrix is singular."""


class ConvergenceWarning(UserWarning):
    """Joint diagonalization hit the sweep limit before the angles converged."""

    def __init__(self, message, final_angle=float("nan")):
        super().__init__(message)
        self.final_angle = final_angle
