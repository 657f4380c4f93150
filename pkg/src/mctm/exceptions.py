"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid basis/model configuration or mismatched dimensions."""


class InversionError(RuntimeError):
    """A marginal transformation is not monotone at the requested covariates."""


class SingularFisherError(RuntimeError):
    """Observed Fisher information is singular or too ill-conditioned to invert."""
