"""Exception hierarchy shared by the library and the CLI exit-code mapping."""


class FBSTError(Exception):
    """Base class for all library errors."""


class ValidationError(FBSTError, ValueError):
    """Invalid input: bad hyperparameters, family mismatch, malformed spec."""


class DimensionError(ValidationError):
    """A point does not have the ambient dimension of its parameter space."""


class InapplicableMapError(ValidationError):
    """A reparameterization cannot be applied to the model's support."""


class OptimizationError(FBSTError):
    """Surprise maximization failed (no finite value, empty hypothesis)."""


class InfeasibleHypothesisError(OptimizationError):
    """No feasible point of the null set could be located."""


class SamplerError(FBSTError):
    """Posterior sampling could not proceed."""
