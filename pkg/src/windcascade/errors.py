"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Raised when inputs violate a documented precondition (bad moments,
    malformed config, inconsistent dimensions)."""


class SamplerError(ValidationError):
    """Raised when a requested distribution family cannot represent the
    target moments (e.g. a normal sampler for a skewed target)."""
