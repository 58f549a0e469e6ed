"""Exception types raised by the estimators."""


class ParameterDomainError(ValueError):
    """A parameter or argument lies outside its admissible domain."""


class MomentUndefinedError(ParameterDomainError):
    """E(exp(y)) diverges for the requested parameters."""


class EstimationError(RuntimeError):
    """An estimator could not produce a usable result."""
