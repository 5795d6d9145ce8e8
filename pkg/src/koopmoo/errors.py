"""Exception and warning types shared across the package."""


class ConfigurationError(ValueError):
    """Inputs are inconsistent (dimension mismatch, missing basis entries, bad parameters)."""


class DegenerateDataError(ValueError):
    """Training data carries no information (e.g. an all-zero feature matrix)."""


class IndefiniteDiffusionError(ValueError):
    """A diffusion matrix has an eigenvalue below the semidefinite floor."""


class StabilityError(RuntimeError):
    """An explicit integrator step moved a state component too far."""


class HorizonError(OverflowError):
    """The requested propagation horizon overflows the matrix exponential."""


class RepresentabilityWarning(UserWarning):
    """Products needed for diffusion recovery leave the dictionary span."""


class ExtrapolationWarning(UserWarning):
    """A control lies outside the region a surrogate was trained on."""


class EmptyModelWarning(UserWarning):
    """Thresholding removed every coefficient."""


class SamplingWarning(UserWarning):
    """Objective evaluations failed or a box was kept conservatively."""
